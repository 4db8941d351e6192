//! Scoring kernels for state matching.
//!
//! The environment score of a memory state `M` against a query state `Q` is
//! `iou(M, Q) * length_overlap(|M|, |Q|)`; the internal score is the inner
//! product of the two internal-state embeddings. Set kernels are generic over
//! [`Scalar`], so they evaluate exactly with rational scalars and in double
//! precision for the retrieval pipeline.

use crate::embed::{EmbedError, EmbeddingVector};
use crate::scalar::{Real, Scalar};
use crate::state::EnvState;

fn ratio<S: Scalar>(num: usize, den: usize) -> S {
    let num = S::from_usize(num).expect("set cardinality representable in scalar");
    let den = S::from_usize(den).expect("set cardinality representable in scalar");
    num / den
}

/// Intersection-over-union of two feature-token sets.
///
/// Two empty states are indistinguishable observations, so `iou(∅, ∅) = 1`.
pub fn iou<S: Scalar>(a: &EnvState, b: &EnvState) -> S {
    let inter = a.intersection_size(b);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        return S::one();
    }
    ratio(inter, union)
}

/// `1 - |lm - lq| / max(lm, lq)`, the size-mismatch penalty between a memory
/// state of cardinality `lm` and a query state of cardinality `lq`.
/// `length_overlap(0, 0) = 1` by the same degenerate-observation convention.
pub fn length_overlap<S: Scalar>(lm: usize, lq: usize) -> S {
    let max = lm.max(lq);
    if max == 0 {
        return S::one();
    }
    S::one() - ratio(lm.abs_diff(lq), max)
}

/// Combined environment score: IoU weighted by length overlap.
pub fn env_score<S: Scalar>(mem_env: &EnvState, query_env: &EnvState) -> S {
    let v: S = iou(mem_env, query_env);
    let l: S = length_overlap(mem_env.len(), query_env.len());
    v * l
}

/// Dot product of two embedding vectors of equal dimension.
pub fn inner_product<F: Real>(
    a: &EmbeddingVector<F>,
    b: &EmbeddingVector<F>,
) -> Result<F, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let mut acc = F::zero();
    for (x, y) in a.components().iter().zip(b.components()) {
        acc = acc + *x * *y;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::*;

    type Exact = Ratio<i64>;

    fn env(tokens: &[&str]) -> EnvState {
        EnvState::from_observation(tokens)
    }

    #[test]
    fn iou_of_identical_nonempty_states_is_one() {
        let a = env(&["a", "b", "c"]);
        assert_eq!(iou::<Exact>(&a, &a), Exact::from_integer(1));
        assert_eq!(iou::<f64>(&a, &a), 1.0);
    }

    #[test]
    fn iou_of_disjoint_states_is_zero() {
        let a = env(&["a", "b"]);
        let b = env(&["x", "y"]);
        assert_eq!(iou::<Exact>(&a, &b), Exact::from_integer(0));
        assert_eq!(iou::<f64>(&a, &b), 0.0);
    }

    #[test]
    fn iou_worked_example_is_one_half() {
        let a = env(&["a", "b", "c"]);
        let b = env(&["b", "c", "d"]);
        assert_eq!(iou::<Exact>(&a, &b), Exact::new(1, 2));
        assert!((iou::<f64>(&a, &b) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn iou_of_two_empty_states_is_one() {
        let e = EnvState::empty();
        assert_eq!(iou::<Exact>(&e, &e), Exact::from_integer(1));
        assert_eq!(iou::<f64>(&e, &e), 1.0);
    }

    #[test]
    fn length_overlap_examples() {
        assert_eq!(length_overlap::<Exact>(7, 7), Exact::from_integer(1));
        assert_eq!(length_overlap::<Exact>(10, 5), Exact::new(1, 2));
        assert!((length_overlap::<f64>(10, 5) - 0.5).abs() < 1e-12);
        assert_eq!(length_overlap::<Exact>(0, 4), Exact::from_integer(0));
        assert_eq!(length_overlap::<Exact>(0, 0), Exact::from_integer(1));
    }

    #[test]
    fn env_score_composes_both_kernels() {
        let a = env(&["a", "b", "c"]);
        let b = env(&["b", "c", "d"]);
        // iou 1/2, equal lengths so overlap 1.
        assert_eq!(env_score::<Exact>(&a, &b), Exact::new(1, 2));

        let c = env(&["a"]);
        let d = env(&["b", "c"]);
        // disjoint sets zero out the product even though overlap is 1/2
        assert_eq!(env_score::<Exact>(&c, &d), Exact::from_integer(0));
        assert_eq!(env_score::<f64>(&c, &d), 0.0);

        assert_eq!(env_score::<f64>(&a, &a), 1.0);
    }

    #[test]
    fn inner_product_examples() {
        let e1 = EmbeddingVector::new(vec![1.0, 0.0]);
        let e2 = EmbeddingVector::new(vec![0.0, 1.0]);
        assert_eq!(inner_product(&e1, &e1).unwrap(), 1.0);
        assert_eq!(inner_product(&e1, &e2).unwrap(), 0.0);

        let a = EmbeddingVector::new(vec![0.6f64, 0.8]);
        let b = EmbeddingVector::new(vec![0.8f64, 0.6]);
        assert!((inner_product(&a, &b).unwrap() - 0.96).abs() < 1e-12);
    }

    #[test]
    fn inner_product_rejects_dimension_mismatch() {
        let a = EmbeddingVector::new(vec![1.0, 0.0]);
        let b = EmbeddingVector::new(vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            inner_product(&a, &b),
            Err(EmbedError::DimensionMismatch {
                expected: 2,
                got: 3
            })
        ));
    }

    fn arb_env() -> impl Strategy<Value = EnvState> {
        proptest::collection::vec("[a-h]", 0..8).prop_map(|v| EnvState::from_observation(&v))
    }

    proptest! {
        #[test]
        fn iou_is_symmetric(a in arb_env(), b in arb_env()) {
            prop_assert_eq!(iou::<Exact>(&a, &b), iou::<Exact>(&b, &a));
        }

        #[test]
        fn iou_with_self_is_one(a in arb_env()) {
            prop_assert_eq!(iou::<Exact>(&a, &a), Exact::from_integer(1));
        }

        #[test]
        fn length_overlap_symmetric_and_one_iff_equal(lm in 0usize..50, lq in 0usize..50) {
            let ab: Exact = length_overlap(lm, lq);
            let ba: Exact = length_overlap(lq, lm);
            prop_assert_eq!(ab.clone(), ba);
            prop_assert_eq!(ab == Exact::from_integer(1), lm == lq);
        }

        #[test]
        fn env_score_bounded_by_iou(a in arb_env(), b in arb_env()) {
            let s: Exact = env_score(&a, &b);
            let v: Exact = iou(&a, &b);
            prop_assert!(s <= v);
            prop_assert!(s >= Exact::from_integer(0));
            prop_assert!(s <= Exact::from_integer(1));
        }

        #[test]
        fn iou_monotone_under_shared_token(a in arb_env(), b in arb_env()) {
            // Adding one token common to both sets never decreases IoU.
            let extra = crate::state::canonicalize_token("zz shared").unwrap();
            let before: Exact = iou(&a, &b);
            let after: Exact = iou(&a.with_token(extra.clone()), &b.with_token(extra));
            prop_assert!(after >= before);
        }
    }
}
