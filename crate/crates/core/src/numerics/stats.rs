use crate::error::{Error, Result};

/// Lower median: for even lengths the smaller of the two middle elements.
/// The result is always an element of `values`.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Argument("median of an empty sequence".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("median input contains a non-finite value".into()));
    }
    let mut buf = values.to_vec();
    let k = (buf.len() - 1) / 2;
    let (_, m, _) = buf.select_nth_unstable_by(k, f64::total_cmp);
    Ok(*m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn singleton() {
        assert_eq!(median(&[3.0]).unwrap(), 3.0);
    }

    #[test]
    fn even_length_takes_lower() {
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 3.0, 2.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(median(&[]), Err(Error::Argument(_))));
    }

    #[test]
    fn matches_full_sort() {
        let mut rng = Rng::new(11);
        let xs: Vec<f64> = (0..101).map(|_| rng.normal()).collect();
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(median(&xs).unwrap(), sorted[50]);
    }
}
