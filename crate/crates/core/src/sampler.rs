//! Seedable, thread-count-independent sampling of Brownian paths, Poisson
//! obstacle clouds, and mobile obstacle trajectories.
//!
//! Every sampler output is a pure function of its inputs and a [`SeedSpec`];
//! replicates derive child seeds by counter-based hashing, so results do not
//! depend on scheduling or worker count.

use crate::error::{Error, Result};
use crate::special::unit_ball_volume;
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Master seed plus replicate stream index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        SeedSpec {
            master_seed,
            stream_id,
        }
    }

    /// Same master seed, different stream.
    pub fn stream(&self, stream_id: u64) -> Self {
        SeedSpec {
            master_seed: self.master_seed,
            stream_id,
        }
    }

    /// Child seed for a named purpose; distinct purposes give independent
    /// streams even at equal (master, stream).
    pub fn derive(&self, purpose: Purpose, index: u64) -> u64 {
        let mut h = splitmix(self.master_seed ^ 0x9e37_79b9_7f4a_7c15);
        h = splitmix(h ^ self.stream_id.wrapping_mul(0xd134_2543_de82_ef95));
        h = splitmix(h ^ (purpose as u64).wrapping_mul(0x2545_f491_4f6c_dd1d));
        splitmix(h ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    pub fn rng(&self, purpose: Purpose, index: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.derive(purpose, index))
    }
}

/// Purpose tags for child-stream derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Particle = 1,
    Obstacle = 2,
    CloudCount = 3,
    CloudCenters = 4,
    Direction = 5,
    Optimizer = 6,
    Generic = 7,
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform time grid on [0, t_end] with n_steps steps (n_steps + 1 nodes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_end: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::Positivity(format!("t_end must be positive: {t_end}")));
        }
        if n_steps == 0 {
            return Err(Error::Positivity("n_steps must be >= 1".into()));
        }
        Ok(TimeGrid { t_end, n_steps })
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            k as f64 * self.spacing()
        }
    }
}

/// A discretized trajectory on a uniform grid: position at each node,
/// stored flat row-major (node-major, coordinate-minor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub grid: TimeGrid,
    pub dim: usize,
    /// Per-step per-coordinate standard deviation is volatility * sqrt(dt);
    /// 1 for the particle, sigma for obstacles, 0 for frozen test paths.
    pub volatility: f64,
    data: Vec<f64>,
}

impl PathSample {
    /// Path from an explicit function of time.
    pub fn from_fn<F: Fn(f64, &mut [f64])>(grid: TimeGrid, dim: usize, f: F) -> Self {
        let mut data = vec![0.0; grid.n_nodes() * dim];
        let mut buf = vec![0.0; dim];
        for k in 0..grid.n_nodes() {
            f(grid.node(k), &mut buf);
            data[k * dim..(k + 1) * dim].copy_from_slice(&buf);
        }
        PathSample {
            grid,
            dim,
            volatility: 0.0,
            data,
        }
    }

    /// Constant path at a fixed position.
    pub fn constant(grid: TimeGrid, pos: &[f64]) -> Self {
        let dim = pos.len();
        let mut data = vec![0.0; grid.n_nodes() * dim];
        for k in 0..grid.n_nodes() {
            data[k * dim..(k + 1) * dim].copy_from_slice(pos);
        }
        PathSample {
            grid,
            dim,
            volatility: 0.0,
            data,
        }
    }

    #[inline]
    pub fn point(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Largest Euclidean norm over the grid nodes.
    pub fn max_norm(&self) -> f64 {
        self.points()
            .map(|pt| pt.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Brownian rescaling: s -> t_factor * s in time, sqrt(t_factor) in
    /// space, which maps a horizon-1 sample onto a horizon-t_factor one.
    pub fn brownian_rescaled(&self, t_factor: f64) -> PathSample {
        let scale = t_factor.sqrt();
        PathSample {
            grid: TimeGrid {
                t_end: self.grid.t_end * t_factor,
                n_steps: self.grid.n_steps,
            },
            dim: self.dim,
            volatility: self.volatility,
            data: self.data.iter().map(|x| x * scale).collect(),
        }
    }
}

/// Sample a Brownian path with independent N(0, volatility^2 dt) increments
/// per coordinate. volatility = 0 yields the frozen constant path (used by
/// tests only).
pub fn sample_brownian(
    grid: TimeGrid,
    start: &[f64],
    volatility: f64,
    seed: SeedSpec,
) -> PathSample {
    let mut rng = seed.rng(Purpose::Particle, 0);
    sample_brownian_with(&mut rng, grid, start, volatility)
}

fn sample_brownian_with(
    rng: &mut ChaCha8Rng,
    grid: TimeGrid,
    start: &[f64],
    volatility: f64,
) -> PathSample {
    let dim = start.len();
    let step_sd = volatility * grid.spacing().sqrt();
    let mut data = vec![0.0; grid.n_nodes() * dim];
    data[..dim].copy_from_slice(start);
    for k in 1..grid.n_nodes() {
        let (prev, cur) = data.split_at_mut(k * dim);
        let prev = &prev[(k - 1) * dim..];
        for j in 0..dim {
            let z: f64 = StandardNormal.sample(rng);
            cur[j] = prev[j] + step_sd * z;
        }
    }
    PathSample {
        grid,
        dim,
        volatility,
        data,
    }
}

/// Poisson cloud of obstacle starting positions on the ball B(0, radius),
/// with unit (Lebesgue) intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonCloud {
    pub dim: usize,
    pub radius: f64,
    /// Flat row-major centers, len = count * dim.
    centers: Vec<f64>,
}

impl PoissonCloud {
    pub fn count(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.centers.chunks_exact(self.dim)
    }
}

/// Sample a Poisson cloud: count ~ Poisson(omega_d radius^d), centers
/// i.i.d. uniform on the ball.
pub fn sample_cloud(d: usize, radius: f64, seed: SeedSpec) -> Result<PoissonCloud> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Positivity(format!("radius must be positive: {radius}")));
    }
    let mean = unit_ball_volume(d)? * radius.powi(d as i32);
    let mut count_rng = seed.rng(Purpose::CloudCount, 0);
    let count = Poisson::new(mean)
        .map_err(|e| Error::Domain(format!("Poisson mean invalid: {e}")))?
        .sample(&mut count_rng) as usize;
    let mut rng = seed.rng(Purpose::CloudCenters, 0);
    let mut centers = Vec::with_capacity(count * d);
    for _ in 0..count {
        // Direction from a normalized Gaussian, radius from U^{1/d}.
        let mut v: Vec<f64> = vec![0.0; d];
        loop {
            let mut norm2 = 0.0;
            for x in v.iter_mut() {
                *x = StandardNormal.sample(&mut rng);
                norm2 += *x * *x;
            }
            if norm2 > 0.0 {
                let u: f64 = rng.gen();
                let r = radius * u.powf(1.0 / d as f64);
                let s = r / norm2.sqrt();
                for x in v.iter_mut() {
                    *x *= s;
                }
                break;
            }
        }
        centers.extend_from_slice(&v);
    }
    Ok(PoissonCloud {
        dim: d,
        radius,
        centers,
    })
}

/// Evolve every obstacle of a cloud as an independent Brownian path started
/// at its center with volatility sigma.
pub fn evolve_obstacles(
    cloud: &PoissonCloud,
    grid: TimeGrid,
    sigma: f64,
    seed: SeedSpec,
) -> Vec<PathSample> {
    (0..cloud.count())
        .map(|i| {
            let mut rng = seed.rng(Purpose::Obstacle, i as u64);
            sample_brownian_with(&mut rng, grid, cloud.center(i), sigma)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// binary dump (debugging aid)
// ---------------------------------------------------------------------------

const DUMP_MAGIC: u32 = 0x4d54_5042; // "MTPB"

/// Write a path in the debug dump format: magic, d, n_steps as u32 LE,
/// t_end as f64 LE, (master_seed, stream_id) as u64 LE, then the node
/// positions row-major as little-endian f64.
pub fn dump_path<W: Write>(w: &mut W, path: &PathSample, seed: SeedSpec) -> Result<()> {
    w.write_all(&DUMP_MAGIC.to_le_bytes())?;
    w.write_all(&(path.dim as u32).to_le_bytes())?;
    w.write_all(&(path.grid.n_steps as u32).to_le_bytes())?;
    w.write_all(&path.grid.t_end.to_le_bytes())?;
    w.write_all(&seed.master_seed.to_le_bytes())?;
    w.write_all(&seed.stream_id.to_le_bytes())?;
    for v in &path.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Read back a debug dump written by [`dump_path`].
pub fn load_path<R: Read>(r: &mut R) -> Result<(PathSample, SeedSpec)> {
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != DUMP_MAGIC {
        return Err(Error::Config("bad path dump magic".into()));
    }
    r.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let n_steps = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8)?;
    let t_end = f64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let master_seed = u64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let stream_id = u64::from_le_bytes(b8);
    let grid = TimeGrid::new(t_end, n_steps)?;
    let mut data = vec![0.0; grid.n_nodes() * dim];
    for v in data.iter_mut() {
        r.read_exact(&mut b8)?;
        *v = f64::from_le_bytes(b8);
    }
    Ok((
        PathSample {
            grid,
            dim,
            volatility: f64::NAN,
            data,
        },
        SeedSpec::new(master_seed, stream_id),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinism_and_stream_independence() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let s = SeedSpec::new(42, 7);
        let a = sample_brownian(grid, &[0.0, 0.0, 0.0], 1.0, s);
        let b = sample_brownian(grid, &[0.0, 0.0, 0.0], 1.0, s);
        assert_eq!(a, b);
        let c = sample_brownian(grid, &[0.0, 0.0, 0.0], 1.0, s.stream(8));
        assert_ne!(a, c);
    }

    #[test]
    fn zero_volatility_is_constant() {
        let grid = TimeGrid::new(2.0, 16).unwrap();
        let p = sample_brownian(grid, &[1.0, -2.0], 0.0, SeedSpec::new(1, 0));
        for pt in p.points() {
            assert_eq!(pt, &[1.0, -2.0]);
        }
    }

    #[test]
    fn endpoint_variance_matches_brownian_law() {
        let grid = TimeGrid::new(2.0, 32).unwrap();
        let vol = 1.5f64;
        let d = 3;
        let n = 10_000;
        let seed = SeedSpec::new(1234, 0);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..n {
            let p = sample_brownian(grid, &[0.0; 3], vol, seed.stream(i as u64));
            let end = p.point(grid.n_steps);
            let norm2: f64 = end.iter().map(|x| x * x).sum();
            sum += norm2;
            sum_sq += norm2 * norm2;
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean).max(0.0);
        let stderr = (var / n as f64).sqrt();
        let want = vol * vol * grid.t_end * d as f64;
        assert!(
            (mean - want).abs() < 5.0 * stderr,
            "mean {mean} want {want} stderr {stderr}"
        );
    }

    #[test]
    fn cross_stream_endpoint_correlation_is_statistically_zero() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let n = 10_000usize;
        let seed = SeedSpec::new(99, 0);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for i in 0..n {
            let a = sample_brownian(grid, &[0.0], 1.0, seed.stream(2 * i as u64));
            let b = sample_brownian(grid, &[0.0], 1.0, seed.stream(2 * i as u64 + 1));
            xs.push(a.point(grid.n_steps)[0]);
            ys.push(b.point(grid.n_steps)[0]);
        }
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let mut cov = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        for i in 0..n {
            cov += (xs[i] - mx) * (ys[i] - my);
            vx += (xs[i] - mx).powi(2);
            vy += (ys[i] - my).powi(2);
        }
        let corr = cov / (vx.sqrt() * vy.sqrt());
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr = {corr}");
    }

    #[test]
    fn cloud_count_matches_intensity() {
        let n = 10_000usize;
        let seed = SeedSpec::new(7, 0);
        let mut total = 0usize;
        for i in 0..n {
            let c = sample_cloud(1, 10.0, seed.stream(i as u64)).unwrap();
            total += c.count();
        }
        let mean = total as f64 / n as f64;
        // Poisson(20): stderr of the mean is sqrt(20/n).
        let stderr = (20.0 / n as f64).sqrt();
        assert!((mean - 20.0).abs() < 5.0 * stderr, "mean {mean}");
    }

    #[test]
    fn empty_cloud_has_positive_probability() {
        // d=1, radius small: P(empty) = exp(-2r) ~ 0.82, so a handful of
        // draws must contain an empty one.
        let seed = SeedSpec::new(11, 0);
        let mut saw_empty = false;
        for i in 0..50 {
            if sample_cloud(1, 0.1, seed.stream(i)).unwrap().count() == 0 {
                saw_empty = true;
                break;
            }
        }
        assert!(saw_empty);
        let empty = PoissonCloud {
            dim: 2,
            radius: 1.0,
            centers: vec![],
        };
        let grid = TimeGrid::new(1.0, 8).unwrap();
        assert!(evolve_obstacles(&empty, grid, 1.0, seed).is_empty());
    }

    #[test]
    fn cloud_centers_rotation_invariant() {
        // Orthant chi-square in d=3: 8 equally likely cells.
        let seed = SeedSpec::new(21, 0);
        let mut counts = [0usize; 8];
        let n = 4000;
        let mut drawn = 0usize;
        for i in 0..n {
            let c = sample_cloud(3, 2.0, seed.stream(i)).unwrap();
            for ctr in c.centers() {
                let idx = ((ctr[0] > 0.0) as usize)
                    | (((ctr[1] > 0.0) as usize) << 1)
                    | (((ctr[2] > 0.0) as usize) << 2);
                counts[idx] += 1;
                drawn += 1;
            }
        }
        let expect = drawn as f64 / 8.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        // chi-square 7 dof, 0.999 quantile.
        assert!(chi2 < 24.322, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn evolved_cloud_is_stationary_in_interior_window() {
        // Point count of the evolved cloud in an interior window matches
        // the time-zero Poisson statistics.
        let d = 1;
        let radius = 12.0;
        let sigma = 1.0;
        let t = 1.0;
        let grid = TimeGrid::new(t, 32).unwrap();
        let window = 3.0; // well inside radius - 5 sigma sqrt(t)
        let n = 4000usize;
        let seed = SeedSpec::new(31, 0);
        let mut total = 0usize;
        for i in 0..n {
            let cloud = sample_cloud(d, radius, seed.stream(i as u64)).unwrap();
            let paths = evolve_obstacles(&cloud, grid, sigma, seed.stream(i as u64));
            for p in &paths {
                let x = p.point(grid.n_steps)[0];
                if x.abs() <= window {
                    total += 1;
                }
            }
        }
        let mean = total as f64 / n as f64;
        let want = 2.0 * window;
        let stderr = (want / n as f64).sqrt();
        assert!(
            (mean - want).abs() < 5.0 * stderr,
            "mean {mean} want {want} stderr {stderr}"
        );
    }

    #[test]
    fn obstacles_reproduce_with_equal_seed() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let seed = SeedSpec::new(5, 3);
        let cloud = sample_cloud(2, 4.0, seed).unwrap();
        let a = evolve_obstacles(&cloud, grid, 0.8, seed);
        let b = evolve_obstacles(&cloud, grid, 0.8, seed);
        assert_eq!(a, b);
        for (p, c) in a.iter().zip(cloud.centers()) {
            assert_eq!(p.point(0), c);
        }
    }

    #[test]
    fn brownian_scaling_two_sample_ks() {
        // Endpoint norms at horizon t scaled by t^{-1/2} against horizon-1
        // sampling: two-sample KS at the 1% level.
        let d = 3;
        let t = 4.0;
        let n = 4000usize;
        let seed = SeedSpec::new(77, 0);
        let grid_t = TimeGrid::new(t, 64).unwrap();
        let grid_1 = TimeGrid::new(1.0, 64).unwrap();
        let mut a: Vec<f64> = (0..n)
            .map(|i| {
                let p = sample_brownian(grid_t, &[0.0; 3], 1.0, seed.stream(i as u64));
                let e = p.point(grid_t.n_steps);
                (e.iter().map(|x| x * x).sum::<f64>()).sqrt() / t.sqrt()
            })
            .collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| {
                let p = sample_brownian(grid_1, &[0.0; 3], 1.0, seed.stream((n + i) as u64));
                let e = p.point(grid_1.n_steps);
                (e.iter().map(|x| x * x).sum::<f64>()).sqrt()
            })
            .collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut i = 0;
        let mut j = 0;
        let mut dmax: f64 = 0.0;
        while i < n && j < n {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            dmax = dmax.max((i as f64 / n as f64 - j as f64 / n as f64).abs());
        }
        // critical value at alpha = 0.01: c(alpha) sqrt(2/n)
        let crit = 1.6276 * (2.0 / n as f64).sqrt();
        assert!(dmax < crit, "KS statistic {dmax} >= {crit}");
    }

    #[test]
    fn dump_roundtrip() {
        let grid = TimeGrid::new(0.5, 8).unwrap();
        let seed = SeedSpec::new(123, 9);
        let p = sample_brownian(grid, &[0.0, 1.0], 2.0, seed);
        let mut buf = Vec::new();
        dump_path(&mut buf, &p, seed).unwrap();
        let (q, s2) = load_path(&mut buf.as_slice()).unwrap();
        assert_eq!(s2, seed);
        assert_eq!(q.dim, p.dim);
        assert_eq!(q.grid, p.grid);
        assert_eq!(q.data(), p.data());
    }
}
