//! Gradient-weighted class activation maps over the last backbone block.

use crate::data::Image;
use crate::model::Model;
use crate::tensor::{Graph, Mode, Tensor};
use std::io::Write;
use std::path::Path;

/// Heatmap from a feature-map value and the gradient of the target logit
/// w.r.t. that feature map: channel weights are the spatial mean of the
/// gradient, the map is relu of the weighted channel sum, min-max normalized
/// (an all-zero map stays all-zero). Returns the feature-resolution map.
pub fn cam_from_feature_grad(features: &Tensor, grad: Option<&[f32]>) -> Tensor {
    let (n, c, h, w) = features.dims4();
    assert_eq!(n, 1, "activation maps are computed per image");
    let area = h * w;
    let mut map = vec![0.0f32; area];
    if let Some(grad) = grad {
        for ci in 0..c {
            let base = ci * area;
            let weight: f32 = grad[base..base + area].iter().sum::<f32>() / area as f32;
            for p in 0..area {
                map[p] += weight * features.data()[base + p];
            }
        }
    }
    for v in &mut map {
        *v = v.max(0.0);
    }
    let max = map.iter().cloned().fold(0.0f32, f32::max);
    let min = map.iter().cloned().fold(f32::INFINITY, f32::min);
    if max > min && max > 0.0 {
        for v in &mut map {
            *v = (*v - min) / (max - min);
        }
    }
    Tensor::new(&[h, w], map)
}

/// Bilinear upsample of an [h,w] map to [side,side], corner-aligned.
pub fn upsample_bilinear(map: &Tensor, side: usize) -> Tensor {
    let (h, w) = map.dims2();
    let mut out = vec![0.0f32; side * side];
    for r in 0..side {
        for c in 0..side {
            let sr = if side > 1 { r as f32 * (h - 1) as f32 / (side - 1) as f32 } else { 0.0 };
            let sc = if side > 1 { c as f32 * (w - 1) as f32 / (side - 1) as f32 } else { 0.0 };
            let r0 = sr.floor() as usize;
            let c0 = sc.floor() as usize;
            let r1 = (r0 + 1).min(h - 1);
            let c1 = (c0 + 1).min(w - 1);
            let fr = sr - r0 as f32;
            let fc = sc - c0 as f32;
            let v = map.data()[r0 * w + c0] * (1.0 - fr) * (1.0 - fc)
                + map.data()[r0 * w + c1] * (1.0 - fr) * fc
                + map.data()[r1 * w + c0] * fr * (1.0 - fc)
                + map.data()[r1 * w + c1] * fr * fc;
            out[r * side + c] = v;
        }
    }
    Tensor::new(&[side, side], out)
}

/// Activation heatmap of `target_class` for one image, upsampled to the
/// input resolution with values in [0,1].
pub fn gradcam(model: &Model, image: &Image, target_class: usize) -> Tensor {
    assert!(
        target_class < model.k_seen(),
        "target class {target_class} outside the {} seen classes",
        model.k_seen()
    );
    let batch = crate::data::stack_images([image]);
    let mut g = Graph::new();
    let pass = model.forward(&mut g, batch, Mode::Eval);
    let logit = g.pick(pass.image_logits, target_class);
    g.backward(logit);
    let features = g.value(pass.features).clone();
    let cam = cam_from_feature_grad(&features, g.grad(pass.features));
    upsample_bilinear(&cam, model.config.input_side)
}

/// Write an [h,w] map in [0,1] as a binary portable graymap (P5).
pub fn write_pgm(path: &Path, map: &Tensor) -> std::io::Result<()> {
    let (h, w) = map.dims2();
    let mut file = std::fs::File::create(path)?;
    write!(file, "P5\n{w} {h}\n255\n")?;
    let bytes: Vec<u8> =
        map.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    file.write_all(&bytes)
}
