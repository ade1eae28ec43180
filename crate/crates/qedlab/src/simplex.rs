//! Simplex mesh enumeration and projection helpers shared by the HJB argmin
//! and the policy machinery.

/// Number of mesh points: C(s + k - 1, k - 1).
pub fn mesh_len(k: usize, s: usize) -> usize {
    // binomial via incremental product to avoid overflow for the small k here
    let mut num = 1usize;
    for j in 1..k {
        num = num * (s + j) / j;
    }
    num
}

/// Enumerates the uniform mesh on S^k with edge resolution s, as flattened
/// rows of length k. The first point is (1, 0, ..., 0): points are ordered
/// with the leading coordinate descending, which is also the deterministic
/// argmin tie-break order.
pub fn simplex_mesh(k: usize, s: usize) -> Vec<f64> {
    assert!(k >= 1 && s >= 1);
    let mut out = Vec::with_capacity(mesh_len(k, s) * k);
    let mut prefix = vec![0usize; k];
    fill(s, 0, k, &mut prefix, s, &mut out);
    out
}

fn fill(remaining: usize, slot: usize, k: usize, prefix: &mut [usize], s: usize, out: &mut Vec<f64>) {
    if slot == k - 1 {
        prefix[slot] = remaining;
        out.extend(prefix.iter().map(|&j| j as f64 / s as f64));
        return;
    }
    for j in (0..=remaining).rev() {
        prefix[slot] = j;
        fill(remaining - j, slot + 1, k, prefix, s, out);
    }
}

/// Projects onto S^k by clamping negatives to zero and renormalizing.
/// A degenerate all-zero input becomes the uniform point.
pub fn project_to_simplex(u: &mut [f64]) {
    let mut sum = 0.0;
    for v in u.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
        sum += *v;
    }
    if sum <= 0.0 {
        let k = u.len() as f64;
        u.fill(1.0 / k);
    } else {
        for v in u.iter_mut() {
            *v /= sum;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_k2() {
        let m = simplex_mesh(2, 2);
        assert_eq!(m, vec![1.0, 0.0, 0.5, 0.5, 0.0, 1.0]);
        assert_eq!(mesh_len(2, 2), 3);
    }

    #[test]
    fn mesh_k3_counts_and_order() {
        let s = 4;
        let m = simplex_mesh(3, s);
        assert_eq!(m.len() / 3, mesh_len(3, s));
        assert_eq!(&m[0..3], &[1.0, 0.0, 0.0]);
        for row in m.chunks(3) {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn mesh_contains_all_vertices() {
        let m = simplex_mesh(3, 5);
        for v in 0..3 {
            let mut target = vec![0.0; 3];
            target[v] = 1.0;
            assert!(m.chunks(3).any(|row| row == target.as_slice()));
        }
    }

    #[test]
    fn projection() {
        let mut u = vec![-0.5, 0.5, 1.0];
        project_to_simplex(&mut u);
        assert_eq!(u, vec![0.0, 1.0 / 3.0, 2.0 / 3.0]);
        let mut z = vec![-1.0, -2.0];
        project_to_simplex(&mut z);
        assert_eq!(z, vec![0.5, 0.5]);
    }
}
