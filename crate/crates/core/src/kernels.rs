//! Closed-form heat, Riesz and `q_t` kernels, generic over the scalar type.

use crate::error::{Error, Result};
use crate::scalar::{gamma, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Free,
    Neumann,
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    HeatFree,
    HeatNeumann,
    HeatDirichlet,
    /// Component `j` is 1-based.
    RieszFree(usize),
    RieszNeumann(usize),
    RieszDirichlet(usize),
    Qt,
}

impl KernelFamily {
    pub fn is_riesz(self) -> bool {
        matches!(self, KernelFamily::RieszFree(_) | KernelFamily::RieszNeumann(_) | KernelFamily::RieszDirichlet(_))
    }

    pub fn boundary(self) -> Boundary {
        match self {
            KernelFamily::HeatNeumann | KernelFamily::RieszNeumann(_) => Boundary::Neumann,
            KernelFamily::HeatDirichlet | KernelFamily::RieszDirichlet(_) => Boundary::Dirichlet,
            _ => Boundary::Free,
        }
    }

    /// Parses the CLI names `heat-free`, `riesz-neumann-1`, `qt`, ...
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("unknown kernel {s}"));
        Ok(match s {
            "heat-free" => KernelFamily::HeatFree,
            "heat-neumann" => KernelFamily::HeatNeumann,
            "heat-dirichlet" => KernelFamily::HeatDirichlet,
            "qt" => KernelFamily::Qt,
            _ => {
                let (head, j) = s.rsplit_once('-').ok_or_else(bad)?;
                let j: usize = j.parse().map_err(|_| bad())?;
                match head {
                    "riesz-free" => KernelFamily::RieszFree(j),
                    "riesz-neumann" => KernelFamily::RieszNeumann(j),
                    "riesz-dirichlet" => KernelFamily::RieszDirichlet(j),
                    _ => return Err(bad()),
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec<T> {
    pub family: KernelFamily,
    pub dim: usize,
    /// Time for heat kernels, scale for `q_t`; ignored by Riesz kernels.
    pub t: T,
}

impl<T: Real> KernelSpec<T> {
    pub fn new(family: KernelFamily, dim: usize, t: T) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Parameter(format!("dimension {dim} not in {{1,2}}")));
        }
        match family {
            KernelFamily::RieszFree(j) | KernelFamily::RieszNeumann(j) | KernelFamily::RieszDirichlet(j) => {
                if j == 0 || j > dim {
                    return Err(Error::Parameter(format!("Riesz component {j} outside 1..={dim}")));
                }
            }
            _ => {
                if !(t > T::zero()) {
                    return Err(Error::Parameter("kernel time must be positive".into()));
                }
            }
        }
        Ok(KernelSpec { family, dim, t })
    }

    pub fn riesz(family: KernelFamily, dim: usize) -> Result<Self> {
        Self::new(family, dim, T::one())
    }
}

/// `H(s)`, with `H(0) = 1`.
pub fn heaviside<T: Real>(s: T) -> T {
    if s >= T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

/// `C_n = Γ((n+1)/2) / π^{(n+1)/2}`.
pub fn riesz_constant<T: Real>(n: usize) -> T {
    let a = T::c((n as f64 + 1.0) / 2.0);
    gamma(a) / T::PI().powf(a)
}

fn dist2<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::zero(), |s, (a, b)| s + (*a - *b) * (*a - *b))
}

/// `|x − ỹ|²`.
fn dist2_reflected<T: Real>(x: &[T], y: &[T]) -> T {
    let n = x.len();
    let mut s = T::zero();
    for a in 0..n - 1 {
        s = s + (x[a] - y[a]) * (x[a] - y[a]);
    }
    s + (x[n - 1] + y[n - 1]) * (x[n - 1] + y[n - 1])
}

fn gauss<T: Real>(r2: T, t: T, n: usize) -> T {
    let four = T::c(4.0);
    (four * T::PI() * t).powf(-T::c(n as f64 / 2.0)) * (-r2 / (four * t)).exp()
}

/// `-C_n (x_j − y_j)/|x − y|^{n+1}` with `y` possibly reflected.
fn riesz_free<T: Real>(x: &[T], y: &[T], j: usize, reflected: bool) -> T {
    let n = x.len();
    let (r2, num) = if reflected {
        let num = if j == n { x[n - 1] + y[n - 1] } else { x[j - 1] - y[j - 1] };
        (dist2_reflected(x, y), num)
    } else {
        (dist2(x, y), x[j - 1] - y[j - 1])
    };
    -riesz_constant::<T>(n) * num / r2.powf(T::c((n as f64 + 1.0) / 2.0))
}

fn check_points<T: Real>(spec: &KernelSpec<T>, x: &[T], y: &[T]) -> Result<()> {
    if x.len() != spec.dim || y.len() != spec.dim {
        return Err(Error::Parameter("point dimension does not match kernel".into()));
    }
    Ok(())
}

/// Closed-form kernel value.
pub fn eval_kernel<T: Real>(spec: &KernelSpec<T>, x: &[T], y: &[T]) -> Result<T> {
    check_points(spec, x, y)?;
    if spec.family.is_riesz() && x == y {
        return Err(Error::Singularity("Riesz kernel evaluated on the diagonal".into()));
    }
    Ok(eval_unchecked(spec, x, y, false))
}

/// Kernel value with the diagonal singularity removed: on `x = y` only the reflected part remains.
pub fn eval_kernel_regular<T: Real>(spec: &KernelSpec<T>, x: &[T], y: &[T]) -> T {
    eval_unchecked(spec, x, y, x == y)
}

fn eval_unchecked<T: Real>(spec: &KernelSpec<T>, x: &[T], y: &[T], drop_direct: bool) -> T {
    let n = spec.dim;
    let t = spec.t;
    let hv = || heaviside(x[n - 1] * y[n - 1]);
    let direct = |v: T| if drop_direct { T::zero() } else { v };
    if !matches!(spec.family, KernelFamily::HeatFree | KernelFamily::Qt | KernelFamily::RieszFree(_)) && hv() == T::zero() {
        return T::zero();
    }
    match spec.family {
        KernelFamily::HeatFree => gauss(dist2(x, y), t, n),
        KernelFamily::HeatNeumann => (gauss(dist2(x, y), t, n) + gauss(dist2_reflected(x, y), t, n)) * hv(),
        KernelFamily::HeatDirichlet => (gauss(dist2(x, y), t, n) - gauss(dist2_reflected(x, y), t, n)) * hv(),
        KernelFamily::Qt => eval_qt_unchecked(x, y, t),
        KernelFamily::RieszFree(j) => direct(riesz_free(x, y, j, false)),
        KernelFamily::RieszNeumann(j) => {
            (direct(riesz_free(x, y, j, false)) + riesz_free(x, y, j, true)) * hv()
        }
        KernelFamily::RieszDirichlet(j) => {
            (direct(riesz_free(x, y, j, false)) - riesz_free(x, y, j, true)) * hv()
        }
    }
}

fn eval_qt_unchecked<T: Real>(x: &[T], y: &[T], t: T) -> T {
    let n = x.len();
    let four = T::c(4.0);
    let u = dist2(x, y) / (four * t * t);
    (four * T::PI()).powf(-T::c(n as f64 / 2.0)) * t.powi(-(n as i32)) * (-u).exp() * (T::c(n as f64 / 2.0) - u)
}

/// `q_t(x,y) = −t² ∂_s p_s(x,y)|_{s=t²} = (4π)^{-n/2} t^{-n} e^{-r²/4t²} (n/2 − r²/4t²)`.
pub fn eval_qt<T: Real>(x: &[T], y: &[T], t: T) -> Result<T> {
    if !(t > T::zero()) {
        return Err(Error::Parameter("q_t needs t > 0".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Parameter("point dimensions differ".into()));
    }
    Ok(eval_qt_unchecked(x, y, t))
}

/// `ψ(s) = s^{-1}(2 sin(s/2) − sin s)`, with the series `s²/8` near zero.
pub fn psi_multiplier<T: Real>(s: T) -> T {
    let s = s.abs();
    if s < T::c(1e-4) {
        return s * s / T::c(8.0);
    }
    (T::c(2.0) * (s / T::c(2.0)).sin() - s.sin()) / s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub family: KernelFamily,
    pub samples: usize,
    /// Largest `|K| · bound^{-1}` for the size estimate.
    pub size_constant: f64,
    /// Largest `|K(x,y) − K(x',y)| · bound^{-1}` over triples with `|x − x'| ≤ |x − y|/2`.
    pub smoothness_constant: f64,
    /// Gaussian exponent `c` used in the size bound `C t^{-n/2} e^{-|x-y|²/(ct)}`.
    pub gaussian_c: f64,
}

/// Samples same-side triples in `(−1,1)^{n-1} × (0,1)` and fits size and smoothness constants.
pub fn check_kernel_smoothness(spec: &KernelSpec<f64>, samples: usize, seed: u64) -> SmoothnessReport {
    let n = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussian_c = 8.0;
    let mut size_c: f64 = 0.0;
    let mut smooth_c: f64 = 0.0;
    let pt = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        v[n - 1] = rng.gen_range(1e-3..1.0);
        v
    };
    for _ in 0..samples {
        let x = pt(&mut rng);
        let y = pt(&mut rng);
        let r = dist2(&x, &y).sqrt();
        if r < 1e-9 {
            continue;
        }
        let mut dx: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dn = dist2(&dx, &vec![0.0; n]).sqrt().max(1e-12);
        let scale = rng.gen_range(0.0..0.5) * r / dn;
        for v in dx.iter_mut() {
            *v *= scale;
        }
        let mut xp: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        if xp[n - 1] <= 0.0 {
            xp[n - 1] = x[n - 1];
        }
        let step = dist2(&x, &xp).sqrt();
        let mut s = *spec;
        if !spec.family.is_riesz() {
            s.t = 10f64.powf(rng.gen_range(-2.0..0.0));
        }
        let k = eval_unchecked(&s, &x, &y, false);
        let kp = eval_unchecked(&s, &xp, &y, false);
        let t = s.t;
        let (size_bound, smooth_bound) = match spec.family {
            KernelFamily::RieszFree(_) | KernelFamily::RieszNeumann(_) | KernelFamily::RieszDirichlet(_) => {
                let cn = riesz_constant::<f64>(n);
                (cn / r.powi(n as i32), step / r.powi(n as i32 + 1))
            }
            KernelFamily::Qt => (
                t.powi(-(n as i32)) * (-r * r / (gaussian_c * t * t)).exp(),
                step / (t + r).powi(n as i32 + 1),
            ),
            _ => (
                t.powf(-(n as f64) / 2.0) * (-r * r / (gaussian_c * t)).exp(),
                step / (t.sqrt() + r).powi(n as i32 + 1),
            ),
        };
        size_c = size_c.max(k.abs() / size_bound);
        if step > 0.0 {
            smooth_c = smooth_c.max((k - kp).abs() / smooth_bound);
        }
    }
    SmoothnessReport {
        family: spec.family,
        samples,
        size_constant: size_c,
        smoothness_constant: smooth_c,
        gaussian_c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_free_peak() {
        let s = KernelSpec::new(KernelFamily::HeatFree, 1, 1.0 / (4.0 * std::f64::consts::PI)).unwrap();
        assert!((eval_kernel(&s, &[0.2], &[0.2]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn neumann_heaviside() {
        let s = KernelSpec::new(KernelFamily::HeatNeumann, 1, 0.7).unwrap();
        assert_eq!(eval_kernel(&s, &[0.3], &[-0.3]).unwrap(), 0.0);
    }

    #[test]
    fn riesz_one_dimensional() {
        let s = KernelSpec::<f64>::riesz(KernelFamily::RieszFree(1), 1).unwrap();
        let x = 1.0 / std::f64::consts::PI;
        assert!((eval_kernel(&s, &[x], &[0.0]).unwrap() + 1.0).abs() < 1e-14);
        assert!(matches!(eval_kernel(&s, &[0.5], &[0.5]), Err(Error::Singularity(_))));
        assert!((riesz_constant::<f64>(2) - 0.5 / std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn psi_values() {
        assert_eq!(psi_multiplier(0.0f64), 0.0);
        assert!((psi_multiplier(std::f64::consts::PI) - 2.0 / std::f64::consts::PI).abs() < 1e-15);
        assert!((psi_multiplier(1e-6f64) / 1.25e-13 - 1.0).abs() < 0.01);
        let a = psi_multiplier(0.99e-4f64);
        let b = psi_multiplier(1.01e-4f64);
        assert!((a / b - (0.99f64 / 1.01).powi(2)).abs() < 1e-6);
    }

    #[test]
    fn generic_scalar() {
        let s = KernelSpec::new(KernelFamily::HeatNeumann, 2, 0.5f32).unwrap();
        let a = eval_kernel(&s, &[0.1f32, 0.2], &[0.3, 0.4]).unwrap();
        let d = KernelSpec::new(KernelFamily::HeatNeumann, 2, 0.5f64).unwrap();
        let b = eval_kernel(&d, &[0.1f64, 0.2], &[0.3, 0.4]).unwrap();
        assert!((a as f64 - b).abs() < 1e-6);
    }

    #[test]
    fn parse_names() {
        assert_eq!(KernelFamily::parse("riesz-neumann-2").unwrap(), KernelFamily::RieszNeumann(2));
        assert_eq!(KernelFamily::parse("qt").unwrap(), KernelFamily::Qt);
        assert!(KernelFamily::parse("riesz-x-1").is_err());
    }
}
