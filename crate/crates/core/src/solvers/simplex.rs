use crate::num::{pos, Scalar};

/// Euclidean projection of `v` onto `{p >= 0, sum p = budget}`.
pub fn simplex_project<T: Scalar>(v: &[T], budget: T) -> Vec<T> {
    assert!(budget > T::zero());
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite input"));
    let mut cum = T::zero();
    let mut theta = T::zero();
    for (j, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - budget) / T::of_usize(j + 1);
        if u - t > T::zero() {
            theta = t;
        }
    }
    let mut p: Vec<T> = v.iter().map(|&x| pos(x - theta)).collect();
    let s = p.iter().fold(T::zero(), |a, &b| a + b);
    let err = budget - s;
    if err != T::zero() {
        // push the rounding residue onto the largest coordinate
        let k = (0..p.len())
            .max_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap())
            .unwrap();
        p[k] = pos(p[k] + err);
    }
    p
}
