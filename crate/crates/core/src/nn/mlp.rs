//! Small fully connected networks with batched forward and backward passes.
//!
//! Weights of layer `l` are stored input-major (`in × out`, row-major) so a
//! one-hot input row selects a contiguous slice of the first layer.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Rectified hidden layers, linear scalar output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// Input width followed by every layer width.
    pub sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least one layer");
        Mlp {
            sizes: sizes.to_vec(),
            weights: sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect(),
            biases: sizes[1..].iter().map(|&o| vec![0.0; o]).collect(),
        }
    }

    /// Uniform `±1/√fan_in` weights, zero biases.
    pub fn random<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut m = Self::zeros(sizes);
        for (l, w) in m.weights.iter_mut().enumerate() {
            let bound = 1.0 / (sizes[l] as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        m
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// All parameters in a fixed order: per layer, weights then biases.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| w.iter().chain(b.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    pub fn fill(&mut self, v: f64) {
        for p in self.params_mut() {
            *p = v;
        }
    }
}

/// A batch of inputs: one-hot rows given by their active indices, or dense rows.
pub enum Input<'a> {
    Sparse { indices: &'a [u32], offsets: &'a [usize] },
    Dense { data: &'a [f64] },
}

impl Input<'_> {
    pub fn batch(&self, width: usize) -> usize {
        match self {
            Input::Sparse { offsets, .. } => offsets.len() - 1,
            Input::Dense { data } => data.len() / width.max(1),
        }
    }
}

/// Pre-activations of every layer for a batch (row-major `batch × width`).
pub struct Activations {
    pub batch: usize,
    pub pre: Vec<Vec<f64>>,
}

impl Activations {
    /// Network outputs, one per row.
    pub fn output(&self) -> &[f64] {
        self.pre.last().expect("at least one layer")
    }
}

#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
    rsc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    debug_assert!(k == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    debug_assert!((m - 1) * rsc + n - 1 < c.len());
    // SAFETY: the strides and extents above address only elements inside the
    // three slices, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}

impl Mlp {
    pub fn forward(&self, input: &Input) -> Activations {
        let batch = input.batch(self.sizes[0]);
        let mut pre = Vec::with_capacity(self.layers());
        let out0 = self.sizes[1];
        let mut z = Vec::with_capacity(batch * out0);
        for _ in 0..batch {
            z.extend_from_slice(&self.biases[0]);
        }
        match input {
            Input::Sparse { indices, offsets } => {
                for r in 0..batch {
                    let row = &mut z[r * out0..(r + 1) * out0];
                    for &a in &indices[offsets[r]..offsets[r + 1]] {
                        let w = &self.weights[0][a as usize * out0..(a as usize + 1) * out0];
                        for (zv, wv) in row.iter_mut().zip(w) {
                            *zv += wv;
                        }
                    }
                }
            }
            Input::Dense { data } => {
                let inw = self.sizes[0];
                gemm(batch, inw, out0, data, inw, 1, &self.weights[0], out0, 1, 1.0, &mut z, out0);
            }
        }
        pre.push(z);
        for l in 1..self.layers() {
            let (inw, outw) = (self.sizes[l], self.sizes[l + 1]);
            let h = relu(&pre[l - 1]);
            let mut z = Vec::with_capacity(batch * outw);
            for _ in 0..batch {
                z.extend_from_slice(&self.biases[l]);
            }
            gemm(batch, inw, outw, &h, inw, 1, &self.weights[l], outw, 1, 1.0, &mut z, outw);
            pre.push(z);
        }
        Activations { batch, pre }
    }

    /// Adds parameter gradients for output gradients `dout` (one per row)
    /// into `grad`.
    pub fn backward(&self, input: &Input, acts: &Activations, dout: &[f64], grad: &mut Mlp) {
        let batch = acts.batch;
        let last = self.layers() - 1;
        debug_assert_eq!(self.sizes[last + 1], 1);
        let mut dz = dout.to_vec();
        for l in (0..=last).rev() {
            let (inw, outw) = (self.sizes[l], self.sizes[l + 1]);
            for r in 0..batch {
                for o in 0..outw {
                    grad.biases[l][o] += dz[r * outw + o];
                }
            }
            if l == 0 {
                match input {
                    Input::Sparse { indices, offsets } => {
                        for r in 0..batch {
                            let d = &dz[r * outw..(r + 1) * outw];
                            for &a in &indices[offsets[r]..offsets[r + 1]] {
                                let g = &mut grad.weights[0][a as usize * outw..(a as usize + 1) * outw];
                                for (gv, dv) in g.iter_mut().zip(d) {
                                    *gv += dv;
                                }
                            }
                        }
                    }
                    Input::Dense { data } => {
                        gemm(inw, batch, outw, data, 1, inw, &dz, outw, 1, 1.0, &mut grad.weights[0], outw);
                    }
                }
                break;
            }
            let h = relu(&acts.pre[l - 1]);
            // dW = hᵀ · dz
            gemm(inw, batch, outw, &h, 1, inw, &dz, outw, 1, 1.0, &mut grad.weights[l], outw);
            // dh = dz · Wᵀ
            let mut dh = vec![0.0; batch * inw];
            gemm(batch, outw, inw, &dz, outw, 1, &self.weights[l], 1, outw, 0.0, &mut dh, inw);
            for (d, &z) in dh.iter_mut().zip(&acts.pre[l - 1]) {
                if z <= 0.0 {
                    *d = 0.0;
                }
            }
            dz = dh;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive(m: &Mlp, x: &[f64]) -> f64 {
        let mut h = x.to_vec();
        for l in 0..m.layers() {
            let (inw, outw) = (m.sizes[l], m.sizes[l + 1]);
            let mut z = m.biases[l].clone();
            for i in 0..inw {
                for o in 0..outw {
                    z[o] += h[i] * m.weights[l][i * outw + o];
                }
            }
            h = if l + 1 < m.layers() { relu(&z) } else { z };
        }
        h[0]
    }

    #[test]
    fn sparse_and_dense_agree_with_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Mlp::random(&[6, 5, 4, 1], &mut rng);
        let indices = [0u32, 3, 5, 2];
        let offsets = [0usize, 2, 2, 4];
        let sparse = m.forward(&Input::Sparse { indices: &indices, offsets: &offsets });
        let mut dense = vec![0.0; 18];
        for r in 0..3 {
            for &a in &indices[offsets[r]..offsets[r + 1]] {
                dense[r * 6 + a as usize] = 1.0;
            }
        }
        let d = m.forward(&Input::Dense { data: &dense });
        for r in 0..3 {
            let expect = naive(&m, &dense[r * 6..(r + 1) * 6]);
            assert!((sparse.output()[r] - expect).abs() < 1e-12);
            assert!((d.output()[r] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = Mlp::random(&[4, 6, 3, 1], &mut rng);
        let data: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let input = Input::Dense { data: &data };
        let acts = m.forward(&input);
        // Loss = Σ output²/2, so dout = output.
        let dout = acts.output().to_vec();
        let mut grad = Mlp::zeros(&m.sizes);
        m.backward(&input, &acts, &dout, &mut grad);
        let loss = |m: &Mlp| m.forward(&input).output().iter().map(|o| o * o / 2.0).sum::<f64>();
        let analytic: Vec<f64> = grad.params().copied().collect();
        for idx in 0..m.n_params() {
            let h = 1e-6;
            let mut plus = m.clone();
            *plus.params_mut().nth(idx).unwrap() += h;
            let mut minus = m.clone();
            *minus.params_mut().nth(idx).unwrap() -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let a = analytic[idx];
            assert!((a - fd).abs() <= 1e-6 * a.abs().max(fd.abs()).max(1e-3), "{idx}: {a} vs {fd}");
        }
    }
}
