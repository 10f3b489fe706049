use super::EvalError;

/// Average precision of a scored list: items are ranked by descending score
/// (ties keep their input order) and precision is averaged over the ranks of
/// the relevant items.
pub fn average_precision(items: &[(f64, bool)]) -> Result<f64, EvalError> {
    let relevant = items.iter().filter(|(_, r)| *r).count();
    if relevant == 0 {
        return Err(EvalError::NoRelevantItems);
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    // Stable sort: equal scores keep input order.
    order.sort_by(|&a, &b| items[b].0.total_cmp(&items[a].0));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &k) in order.iter().enumerate() {
        if items[k].1 {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / relevant as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranked(rel: &[bool]) -> Vec<(f64, bool)> {
        rel.iter()
            .enumerate()
            .map(|(k, &r)| (-(k as f64), r))
            .collect()
    }

    #[test]
    fn fixtures() {
        assert_eq!(average_precision(&ranked(&[true, true, false, false])).unwrap(), 1.0);
        let ap = average_precision(&ranked(&[true, false, true])).unwrap();
        assert!((ap - 0.5 * (1.0 + 2.0 / 3.0)).abs() < 1e-12);
        assert_eq!(average_precision(&[(0.3, true)]).unwrap(), 1.0);
        let ap = average_precision(&ranked(&[false, true, false, false, false])).unwrap();
        assert!((ap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn no_relevant_items() {
        assert_eq!(
            average_precision(&ranked(&[false, false])),
            Err(EvalError::NoRelevantItems)
        );
        assert_eq!(average_precision(&[]), Err(EvalError::NoRelevantItems));
    }

    #[test]
    fn ties_keep_input_order() {
        assert_eq!(average_precision(&[(1.0, true), (1.0, false)]).unwrap(), 1.0);
        assert_eq!(average_precision(&[(1.0, false), (1.0, true)]).unwrap(), 0.5);
    }
}
