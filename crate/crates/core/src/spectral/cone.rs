//! Polyhedral cones `{x : g_j·x ≥ 0}` kept in double description: a basis of
//! the lineality space plus the extreme rays, each ray with the indices of
//! the cuts it lies on.

/// Sign threshold for unit-scaled generators against unit-scaled cuts.
const TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Ray {
    v: Vec<f64>,
    /// Sorted indices of the cuts vanishing on `v`.
    tight: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct Cone {
    lineality: Vec<Vec<f64>>,
    rays: Vec<Ray>,
    cuts: usize,
    /// Dimension of the ambient subspace.
    dim: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let s = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    v
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().filter(|i| b.binary_search(i).is_ok()).copied().collect()
}

fn subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|i| b.binary_search(i).is_ok())
}

impl Cone {
    /// The whole subspace spanned by the coordinates with `free[i]`.
    pub fn full(free: &[bool]) -> Self {
        let n = free.len();
        let lineality: Vec<Vec<f64>> = (0..n)
            .filter(|&i| free[i])
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        Cone {
            dim: lineality.len(),
            lineality,
            rays: Vec::new(),
            cuts: 0,
        }
    }

    /// Whether `g > 0` somewhere in the interior, i.e. on some generator.
    pub fn meets(&self, g: &[f64]) -> bool {
        self.lineality.iter().any(|l| dot(g, l).abs() > TOL) || self.rays.iter().any(|r| dot(g, &r.v) > TOL)
    }

    /// Intersects with `{g ≥ 0}`. Returns false, leaving the cone unchanged,
    /// when the intersection has empty interior.
    pub fn cut(&mut self, g: &[f64]) -> bool {
        if !self.meets(g) {
            return false;
        }
        let index = self.cuts;
        self.cuts += 1;
        let pivot = self
            .lineality
            .iter()
            .enumerate()
            .map(|(k, l)| (k, dot(g, l)))
            .filter(|(_, s)| s.abs() > TOL)
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
        if let Some((k, s)) = pivot {
            let mut lead = self.lineality.swap_remove(k);
            if s < 0.0 {
                lead.iter_mut().for_each(|x| *x = -*x);
            }
            let a = s.abs();
            let project = |v: &mut Vec<f64>| {
                let c = dot(g, v) / a;
                v.iter_mut().zip(&lead).for_each(|(x, y)| *x -= c * y);
            };
            for l in &mut self.lineality {
                project(l);
                *l = unit(std::mem::take(l));
            }
            for r in &mut self.rays {
                project(&mut r.v);
                r.v = unit(std::mem::take(&mut r.v));
                r.tight.push(index);
            }
            // Earlier cuts vanish on the lineality space.
            self.rays.push(Ray {
                v: unit(lead),
                tight: (0..index).collect(),
            });
            return true;
        }
        let signs: Vec<f64> = self.rays.iter().map(|r| dot(g, &r.v)).collect();
        // Adjacent extreme rays share cuts of rank `dim − 2` in the pointed part.
        let dim = self.dim - self.lineality.len();
        let mut next: Vec<Ray> = Vec::new();
        for (r, &s) in self.rays.iter().zip(&signs) {
            if s > TOL {
                next.push(r.clone());
            } else if s >= -TOL {
                let mut r = r.clone();
                r.tight.push(index);
                next.push(r);
            }
        }
        for (p, &sp) in self.rays.iter().zip(&signs) {
            if sp <= TOL {
                continue;
            }
            for (q, &sq) in self.rays.iter().zip(&signs) {
                if sq >= -TOL {
                    continue;
                }
                let common = intersect(&p.tight, &q.tight);
                if common.len() + 2 < dim {
                    continue;
                }
                let adjacent = self
                    .rays
                    .iter()
                    .all(|t| std::ptr::eq(t, p) || std::ptr::eq(t, q) || !subset(&common, &t.tight));
                if !adjacent {
                    continue;
                }
                let v: Vec<f64> = q.v.iter().zip(&p.v).map(|(a, b)| sp * a - sq * b).collect();
                let mut tight = common;
                tight.push(index);
                next.push(Ray { v: unit(v), tight });
            }
        }
        self.rays = next;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthant_from_cuts() {
        let mut c = Cone::full(&[true, true, true]);
        assert!(c.cut(&[1.0, 0.0, 0.0]));
        assert!(c.cut(&[0.0, 1.0, 0.0]));
        assert!(c.cut(&[0.0, 0.0, 1.0]));
        assert!(c.lineality.is_empty());
        assert_eq!(c.rays.len(), 3);
        assert!(!c.cut(&[-1.0, -1.0, 0.0]));
        assert!(c.cut(&[1.0, -1.0, 0.0]));
        // x ≥ y ≥ 0, z ≥ 0 has rays e1, e1+e2, e3.
        assert_eq!(c.rays.len(), 3);
        assert!(!c.meets(&[-1.0, 0.0, 0.0]));
        assert!(c.meets(&[0.0, 1.0, -0.5]));
    }

    #[test]
    fn pinned_coordinates_are_ignored() {
        let mut c = Cone::full(&[false, true]);
        assert!(!c.meets(&[1.0, 0.0]));
        assert!(c.cut(&[0.0, 1.0]));
        assert!(!c.cut(&[0.0, -1.0]));
    }

    #[test]
    fn square_pyramid_cuts() {
        // |x| ≤ z, |y| ≤ z has four extreme rays; the cut x + y ≥ 0 leaves
        // the two rays on the cutting plane and (1, 1, 1).
        let mut c = Cone::full(&[true, true, true]);
        for g in [[-1.0, 0.0, 1.0], [1.0, 0.0, 1.0], [0.0, -1.0, 1.0], [0.0, 1.0, 1.0]] {
            assert!(c.cut(&g));
        }
        assert!(c.lineality.is_empty());
        assert_eq!(c.rays.len(), 4);
        assert!(c.cut(&[1.0, 1.0, 0.0]));
        assert_eq!(c.rays.len(), 3);
        // A cut through two opposite rays adds the two cross-section edges.
        let mut c = Cone::full(&[true, true, true]);
        for g in [[-1.0, 0.0, 1.0], [1.0, 0.0, 1.0], [0.0, -1.0, 1.0], [0.0, 1.0, 1.0]] {
            assert!(c.cut(&g));
        }
        assert!(c.cut(&[1.0, 0.0, 0.0]));
        assert_eq!(c.rays.len(), 4);
        assert!(c.rays.iter().any(|r| r.v == [0.0, 1.0, 1.0]));
    }
}
