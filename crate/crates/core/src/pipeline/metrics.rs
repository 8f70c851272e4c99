//! Label-map comparisons that ignore how classes are numbered.

use crate::error::{Error, Result};
use crate::imagecore::LabelMap;

fn confusion(pred: &LabelMap, truth: &LabelMap) -> Result<Vec<Vec<usize>>> {
    if pred.width() != truth.width() || pred.height() != truth.height() {
        return Err(Error::input("label maps differ in shape"));
    }
    let mut m = vec![vec![0usize; truth.n_labels()]; pred.n_labels()];
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        m[p as usize][t as usize] += 1;
    }
    Ok(m)
}

/// Injective assignment of predicted classes to truth classes maximising the
/// number of agreeing pixels. Predicted classes left over map to `None`.
pub fn best_label_mapping(pred: &LabelMap, truth: &LabelMap) -> Result<Vec<Option<u32>>> {
    let m = confusion(pred, truth)?;
    let (np, nt) = (m.len(), m.first().map_or(0, Vec::len));
    if np.max(nt) > 16 {
        return Err(Error::input("label matching supports at most 16 classes"));
    }
    // dp over (predicted class, used truth set); a predicted class may stay unmatched
    let full = 1usize << nt;
    let mut dp = vec![vec![None::<usize>; full]; np + 1];
    dp[0][0] = Some(0);
    for p in 0..np {
        for mask in 0..full {
            let Some(v) = dp[p][mask] else { continue };
            let skip = &mut dp[p + 1][mask];
            *skip = Some(skip.map_or(v, |s| s.max(v)));
            for t in (0..nt).filter(|t| mask & (1 << t) == 0) {
                let cell = &mut dp[p + 1][mask | (1 << t)];
                let nv = v + m[p][t];
                *cell = Some(cell.map_or(nv, |s| s.max(nv)));
            }
        }
    }
    let (mut mask, _) = (0..full)
        .filter_map(|k| dp[np][k].map(|v| (k, v)))
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .expect("empty mask is reachable");
    let mut mapping = vec![None; np];
    for p in (0..np).rev() {
        let target = dp[p + 1][mask].expect("on the optimal path");
        if dp[p][mask] == Some(target) {
            continue;
        }
        let t = (0..nt)
            .find(|&t| {
                mask & (1 << t) != 0
                    && dp[p][mask ^ (1 << t)].is_some_and(|v| v + m[p][t] == target)
            })
            .expect("predecessor exists");
        mapping[p] = Some(t as u32);
        mask ^= 1 << t;
    }
    Ok(mapping)
}

/// Fraction of pixels whose class agrees with the truth under the best
/// one-to-one relabelling.
pub fn accuracy(pred: &LabelMap, truth: &LabelMap) -> Result<f64> {
    let mapping = best_label_mapping(pred, truth)?;
    let hits = pred
        .labels()
        .iter()
        .zip(truth.labels())
        .filter(|(p, t)| mapping[**p as usize] == Some(**t))
        .count();
    Ok(hits as f64 / pred.labels().len() as f64)
}

/// Mislabelled pixels (under the best relabelling) none of whose 4-neighbours
/// carries the same predicted class.
pub fn isolated_mislabeled(pred: &LabelMap, truth: &LabelMap) -> Result<usize> {
    let mapping = best_label_mapping(pred, truth)?;
    let (w, h) = (pred.width(), pred.height());
    let mut count = 0;
    for y in 0..h {
        for x in 0..w {
            let p = pred.get(x, y);
            if mapping[p as usize] == Some(truth.get(x, y)) {
                continue;
            }
            let mut neighbours = Vec::with_capacity(4);
            if x > 0 {
                neighbours.push(pred.get(x - 1, y));
            }
            if x + 1 < w {
                neighbours.push(pred.get(x + 1, y));
            }
            if y > 0 {
                neighbours.push(pred.get(x, y - 1));
            }
            if y + 1 < h {
                neighbours.push(pred.get(x, y + 1));
            }
            if neighbours.iter().all(|&q| q != p) {
                count += 1;
            }
        }
    }
    Ok(count)
}
