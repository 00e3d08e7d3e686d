use crate::error::{check_dim, Error, Result};

/// Keeps the `k` entries with the largest weights, preserving their original
/// order. Equal weights favour the lower index. Returns the survivors and
/// their original indices.
pub fn hard_threshold<T: Clone>(items: &[T], weights: &[f64], k: usize) -> Result<(Vec<T>, Vec<f64>, Vec<usize>)> {
    check_dim(items.len(), weights.len())?;
    if k > items.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot keep k = {k} of {} entries",
            items.len()
        )));
    }
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // stable sort keeps lower indices first among equal weights
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
    let mut keep = order[..k].to_vec();
    keep.sort_unstable();
    let kept_items = keep.iter().map(|&i| items[i].clone()).collect();
    let kept_weights = keep.iter().map(|&i| weights[i]).collect();
    Ok((kept_items, kept_weights, keep))
}
