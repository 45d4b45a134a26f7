//! Dense direct stiffness assembly, Cholesky factorization and the three
//! analyses built on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scalar::Scalar;

use super::{AnalysisModel, AXES};

pub const DOF_CAP: usize = 3000;
pub const MAX_EIGEN_ITERATIONS: usize = 500;
const EIGEN_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-10;
const EIGEN_SEED: u64 = 0x6d6f_6461_6c00;

/// Constrained stiffness system shared by every analysis of one model.
pub(crate) struct System<T> {
    /// Global dof of each free dof.
    free: Vec<usize>,
    /// Lower-triangular factor, row-major `n × n`.
    l: Vec<T>,
}

fn describe_dof(dof: usize) -> String {
    format!("node {} {}", dof / 3, AXES[dof % 3])
}

impl<T: Scalar> System<T> {
    pub(crate) fn new(model: &AnalysisModel<T>) -> Result<Self> {
        model.validate()?;
        let dofs = model.dof_count();
        if dofs > DOF_CAP {
            return Err(Error::DofCap { dofs, cap: DOF_CAP });
        }
        let mut fixed = vec![false; dofs];
        for s in &model.supports {
            for a in 0..3 {
                fixed[3 * s.node + a] |= s.fixed[a];
            }
        }
        let free: Vec<usize> = (0..dofs).filter(|&d| !fixed[d]).collect();
        let mut index = vec![usize::MAX; dofs];
        for (k, &d) in free.iter().enumerate() {
            index[d] = k;
        }
        let n = free.len();
        let mut k = vec![T::zero(); n * n];
        for m in &model.members {
            let d = model.nodes[m.j] - model.nodes[m.i];
            let len = d.norm();
            let e = d / len;
            let ks = m.material.e * m.area / len;
            for (ni, si) in [(m.i, T::one()), (m.j, -T::one())] {
                for (nj, sj) in [(m.i, T::one()), (m.j, -T::one())] {
                    for a in 0..3 {
                        let r = index[3 * ni + a];
                        if r == usize::MAX {
                            continue;
                        }
                        for b in 0..3 {
                            let c = index[3 * nj + b];
                            if c != usize::MAX {
                                k[r * n + c] += si * sj * ks * e[a] * e[b];
                            }
                        }
                    }
                }
            }
        }
        let l = cholesky(&k, n).map_err(|pivot| Error::SingularSystem {
            mode: null_mode(&k, n, pivot, &free),
        })?;
        Ok(System { free, l })
    }

    fn n(&self) -> usize {
        self.free.len()
    }

    /// Solve `K x = b` on the free dofs.
    fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n();
        let l = &self.l;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for p in 0..i {
                s -= l[i * n + p] * y[p];
            }
            y[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for p in i + 1..n {
                s -= l[p * n + i] * y[p];
            }
            y[i] = s / l[i * n + i];
        }
        y
    }
}

/// Lower factor of a symmetric matrix; `Err(j)` names the first pivot that
/// is not safely positive.
fn cholesky<T: Scalar>(k: &[T], n: usize) -> std::result::Result<Vec<T>, usize> {
    let max_diag = (0..n).map(|i| k[i * n + i]).fold(T::zero(), |a, b| a.max(b));
    let rel = T::of(PIVOT_TOL).max(T::epsilon() * T::of(1e3));
    let tol = max_diag * rel;
    let mut l = vec![T::zero(); n * n];
    for j in 0..n {
        let mut d = k[j * n + j];
        for p in 0..j {
            d -= l[j * n + p] * l[j * n + p];
        }
        if !(d > tol) {
            return Err(j);
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = k[i * n + j];
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p];
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(l)
}

/// Null vector revealed at a failed pivot, described by its dominant dofs.
fn null_mode<T: Scalar>(k: &[T], n: usize, pivot: usize, free: &[usize]) -> String {
    let mut v = vec![T::zero(); pivot + 1];
    v[pivot] = T::one();
    if pivot > 0 {
        // Leading block is positive definite; solve it for the coupling column.
        let lead: Vec<T> = (0..pivot * pivot).map(|x| k[(x / pivot) * n + x % pivot]).collect();
        if let Ok(l) = cholesky(&lead, pivot) {
            let sys = System {
                free: free[..pivot].to_vec(),
                l,
            };
            let col: Vec<T> = (0..pivot).map(|i| k[i * n + pivot]).collect();
            for (i, y) in sys.solve(&col).into_iter().enumerate() {
                v[i] = -y;
            }
        }
    }
    let vmax = v.iter().fold(T::zero(), |a, b| a.max(b.abs()));
    let mut parts: Vec<(usize, T)> = v
        .iter()
        .enumerate()
        .filter(|(_, x)| x.abs() >= vmax * T::of(0.05))
        .map(|(i, x)| (i, x.abs()))
        .collect();
    parts.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    let names: Vec<String> = parts.iter().take(6).map(|(i, _)| describe_dof(free[*i])).collect();
    format!("unrestrained mechanism or rigid-body mode involving {}", names.join(", "))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticSolution<T> {
    pub load_case: String,
    /// mm, per node.
    pub displacements: Vec<Vec3<T>>,
    /// N, tension positive, per member.
    pub axial_forces: Vec<T>,
    /// MPa, `F / A`, per member.
    pub stresses: Vec<T>,
    /// N, per node; zero where nothing is fixed.
    pub reactions: Vec<Vec3<T>>,
    pub reaction_sum: Vec3<T>,
    pub applied_sum: Vec3<T>,
    /// Relative equilibrium residual.
    pub residual: T,
}

impl<T: Scalar> StaticSolution<T> {
    /// Max `|σ|` over members; the truss von Mises proxy.
    pub fn max_stress(&self) -> T {
        self.stresses.iter().fold(T::zero(), |a, s| a.max(s.abs()))
    }

    pub fn max_displacement(&self) -> T {
        self.displacements.iter().fold(T::zero(), |a, u| a.max(u.norm()))
    }

    pub fn max_displacement_in(&self, nodes: &[usize]) -> T {
        nodes.iter().fold(T::zero(), |a, &n| a.max(self.displacements[n].norm()))
    }
}

pub(crate) fn static_with<T: Scalar>(model: &AnalysisModel<T>, sys: &System<T>, lc_id: &str) -> Result<StaticSolution<T>> {
    let lc = model.load_case(lc_id)?;
    let f = model.load_vector(lc)?;
    let b: Vec<T> = sys.free.iter().map(|&d| f[d]).collect();
    let x = sys.solve(&b);
    let nn = model.nodes.len();
    let mut u = vec![Vec3::zero(); nn];
    for (k, &d) in sys.free.iter().enumerate() {
        u[d / 3][d % 3] = x[k];
    }
    let mut imbalance: Vec<Vec3<T>> = (0..nn).map(|n| Vec3::new(f[3 * n], f[3 * n + 1], f[3 * n + 2])).collect();
    let mut axial_forces = Vec::with_capacity(model.members.len());
    let mut stresses = Vec::with_capacity(model.members.len());
    for m in &model.members {
        let d = model.nodes[m.j] - model.nodes[m.i];
        let len = d.norm();
        let e = d / len;
        let force = m.material.e * m.area / len * e.dot(u[m.j] - u[m.i]);
        imbalance[m.i] += e * force;
        imbalance[m.j] -= e * force;
        axial_forces.push(force);
        stresses.push(force / m.area);
    }
    let mut fixed = vec![[false; 3]; nn];
    for s in &model.supports {
        for a in 0..3 {
            fixed[s.node][a] |= s.fixed[a];
        }
    }
    let mut reactions = vec![Vec3::zero(); nn];
    let mut free_res2 = T::zero();
    for n in 0..nn {
        for a in 0..3 {
            if fixed[n][a] {
                reactions[n][a] = -imbalance[n][a];
            } else {
                free_res2 += imbalance[n][a] * imbalance[n][a];
            }
        }
    }
    let sum = |v: &[Vec3<T>]| v.iter().fold(Vec3::zero(), |a, b| a + *b);
    let reaction_sum = sum(&reactions);
    let applied: Vec<Vec3<T>> = (0..nn).map(|n| Vec3::new(f[3 * n], f[3 * n + 1], f[3 * n + 2])).collect();
    let applied_sum = sum(&applied);
    let scale = applied.iter().fold(T::zero(), |a, p| a + p.norm());
    let residual = if scale > T::zero() {
        free_res2.sqrt().max((reaction_sum + applied_sum).norm()) / scale
    } else {
        T::zero()
    };
    Ok(StaticSolution {
        load_case: lc.id.clone(),
        displacements: u,
        axial_forces,
        stresses,
        reactions,
        reaction_sum,
        applied_sum,
        residual,
    })
}

/// Linear static solution of one load case.
pub fn solve_static<T: Scalar>(model: &AnalysisModel<T>, lc_id: &str) -> Result<StaticSolution<T>> {
    model.load_case(lc_id)?;
    static_with(model, &System::new(model)?, lc_id)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucklingSolution<T> {
    pub load_case: String,
    /// `(member, P_cr / |P|)` for compressive members, ascending.
    pub member_factors: Vec<(usize, T)>,
    /// Minimum factor; `+∞` when no member is in compression.
    pub first_mode: T,
}

/// Member Euler factors with pinned-pinned effective length (K = 1).
pub fn buckling_factors<T: Scalar>(model: &AnalysisModel<T>, stat: &StaticSolution<T>) -> BucklingSolution<T> {
    let fmax = stat.axial_forces.iter().fold(T::zero(), |a, f| a.max(f.abs()));
    let floor = fmax * T::of(1e-12);
    let mut member_factors: Vec<(usize, T)> = model
        .members
        .iter()
        .zip(&stat.axial_forces)
        .enumerate()
        .filter(|(_, (_, f))| **f < -floor && **f < T::zero())
        .map(|(k, (m, f))| {
            let len = model.member_length(m);
            let p_cr = T::PI() * T::PI() * m.material.e * m.i_min / (len * len);
            (k, p_cr / f.abs())
        })
        .collect();
    member_factors.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    let first_mode = member_factors.first().map(|x| x.1).unwrap_or_else(T::infinity);
    BucklingSolution {
        load_case: stat.load_case.clone(),
        member_factors,
        first_mode,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalSolution<T> {
    /// ω², 1/s².
    pub eigenvalue: T,
    pub frequency_hz: T,
    pub iterations: usize,
    /// Mass-normalized mode shape, mm per √kg.
    pub mode: Vec<Vec3<T>>,
}

pub(crate) fn modal_with<T: Scalar>(model: &AnalysisModel<T>, sys: &System<T>) -> Result<ModalSolution<T>> {
    let masses = model.nodal_masses();
    let m: Vec<T> = sys.free.iter().map(|&d| masses[d / 3]).collect();
    if !(m.iter().fold(T::zero(), |a, b| a + *b) > T::zero()) {
        return Err(Error::InvalidArgument("no mass on the free degrees of freedom".into()));
    }
    let n = sys.n();
    let mnorm = |x: &[T]| x.iter().zip(&m).fold(T::zero(), |a, (xi, mi)| a + *xi * *xi * *mi);
    let mut rng = ChaCha8Rng::seed_from_u64(EIGEN_SEED);
    let mut x: Vec<T> = (0..n).map(|_| T::of(rng.random_range(-1.0..1.0))).collect();
    let s = mnorm(&x).sqrt();
    x.iter_mut().for_each(|v| *v /= s);
    let tol = T::of(EIGEN_TOL).max(T::epsilon() * T::of(10.0));
    let mut prev: Option<T> = None;
    for it in 1..=MAX_EIGEN_ITERATIONS {
        let b: Vec<T> = x.iter().zip(&m).map(|(a, b)| *a * *b).collect();
        let y = sys.solve(&b);
        let num = y.iter().zip(&b).fold(T::zero(), |a, (p, q)| a + *p * *q);
        let den = mnorm(&y);
        let lambda = num / den;
        let s = den.sqrt();
        x = y.into_iter().map(|v| v / s).collect();
        if let Some(p) = prev {
            if (lambda - p).abs() <= tol * lambda.abs() {
                // N/(mm·kg) to 1/s².
                let eig = lambda * T::of(1000.0);
                let mut mode = vec![Vec3::zero(); model.nodes.len()];
                for (k, &d) in sys.free.iter().enumerate() {
                    mode[d / 3][d % 3] = x[k];
                }
                return Ok(ModalSolution {
                    eigenvalue: eig,
                    frequency_hz: eig.sqrt() / (T::of(2.0) * T::PI()),
                    iterations: it,
                    mode,
                });
            }
        }
        prev = Some(lambda);
    }
    Err(Error::NoConvergence {
        iterations: MAX_EIGEN_ITERATIONS,
    })
}

/// Lowest natural frequency by inverse iteration on the Cholesky factor.
pub fn first_frequency<T: Scalar>(model: &AnalysisModel<T>) -> Result<ModalSolution<T>> {
    modal_with(model, &System::new(model)?)
}
