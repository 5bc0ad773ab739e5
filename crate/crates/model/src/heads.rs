//! The two feature heads. The global head max-pools over time and splits
//! the map into horizontal pyramid strips; the cross-part head blends the
//! feature map against per-node part masks, pools each region, propagates
//! node features over the part graph, and max-pools over time.

use autodiff::{Elem, Tensor};

use crate::error::ModelError;

/// Regional Pooling: global spatial max-pool plus mean-pool, summed per
/// channel. `map` is (frames x c x h x w); output is (frames x c).
pub fn regional_pooling<T: Elem>(map: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
    let s = map.shape();
    if s.len() != 4 {
        return Err(ModelError::Input(format!("regional_pooling expects rank-4 input, got {s:?}")));
    }
    let (frames, c, h, w) = (s[0], s[1], s[2], s[3]);
    let flat = map.reshape(vec![frames, c, h * w])?;
    Ok(flat.max_over(2)?.add(&flat.mean_over(2)?)?)
}

/// One graph-convolution layer `relu(adj_norm * x * w)`, applied per frame.
/// `x` is (frames x nodes x c_in), `adj_norm` (nodes x nodes), `w`
/// (c_in x c_out).
pub fn gcn_layer<T: Elem>(
    x: &Tensor<T>,
    adj_norm: &Tensor<T>,
    w: &Tensor<T>,
) -> Result<Tensor<T>, ModelError> {
    let s = x.shape().to_vec();
    if s.len() != 3 {
        return Err(ModelError::Input(format!("gcn_layer expects rank-3 input, got {s:?}")));
    }
    let (frames, nodes, c_in) = (s[0], s[1], s[2]);
    let c_out = w.shape()[1];
    let mixed = x.node_mix(adj_norm)?;
    let projected = mixed.reshape(vec![frames * nodes, c_in])?.matmul(w)?;
    Ok(projected.relu().reshape(vec![frames, nodes, c_out])?)
}

/// Temporal max over per-frame feature maps followed by horizontal pyramid
/// pooling: for each scale `s`, the map splits into `s` horizontal strips
/// and each strip pools to max + mean, summed.
///
/// `features` is (batch*t x c x h x w); returns one (batch x c) tensor per
/// strip, in pyramid order.
pub fn global_head<T: Elem>(
    features: &Tensor<T>,
    batch: usize,
    t: usize,
    bins: &[usize],
) -> Result<Vec<Tensor<T>>, ModelError> {
    let s = features.shape().to_vec();
    if s.len() != 4 || s[0] != batch * t {
        return Err(ModelError::Input(format!(
            "global_head expects ({}*{}) leading frames, got {s:?}",
            batch, t
        )));
    }
    if t == 0 {
        return Err(ModelError::Input("empty sequence".into()));
    }
    let (c, h, w) = (s[1], s[2], s[3]);
    let per_seq = features.reshape(vec![batch, t, c, h, w])?;
    let pooled = per_seq.max_over(1)?; // batch x c x h x w

    let mut strips = Vec::with_capacity(bins.iter().sum());
    for &scale in bins {
        debug_assert_eq!(h % scale, 0);
        let strip_rows = h / scale;
        let split = pooled.reshape(vec![batch, c, scale, strip_rows * w])?;
        let strip_feats = split.max_over(3)?.add(&split.mean_over(3)?)?; // batch x c x scale
        for i in 0..scale {
            strips.push(split_strip(&strip_feats, batch, c, i)?);
        }
    }
    Ok(strips)
}

fn split_strip<T: Elem>(
    strip_feats: &Tensor<T>,
    batch: usize,
    c: usize,
    index: usize,
) -> Result<Tensor<T>, ModelError> {
    Ok(strip_feats.narrow(2, index, 1)?.reshape(vec![batch, c])?)
}
