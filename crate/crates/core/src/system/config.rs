//! System configuration and matrix assembly.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ParamMap, SecondOrderSystem};
use crate::error::{Error, Result};
use crate::linalg;
use crate::modal;

/// A numeric field that is either a literal or the name of a sampled
/// physical parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Const(f64),
    Param(String),
}

impl ParamValue {
    pub fn resolve(&self, params: &ParamMap) -> Result<f64> {
        match self {
            ParamValue::Const(v) => Ok(*v),
            ParamValue::Param(name) => params
                .get(name)
                .copied()
                .ok_or_else(|| Error::invalid(format!("unknown parameter '{name}'"))),
        }
    }
}

/// One rigid point mass carrying `dofs` translational DOFs (1 for a vertical
/// marble, 3 for free motion in space).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassConfig {
    pub label: String,
    pub mass: ParamValue,
    #[serde(default = "one")]
    pub dofs: usize,
}

fn one() -> usize {
    1
}

/// A reduced flexible body contributing `n_modes` modal DOFs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlexBodyConfig {
    /// Simply supported Euler beam with analytic sine modes.
    EulerBeam {
        label: String,
        /// Mass per unit length, kg/m.
        mass_per_length: ParamValue,
        /// Span, m.
        length: f64,
        /// Bending stiffness EI, N m^2.
        ei: ParamValue,
        n_modes: usize,
        /// Rayleigh damping constants.
        alpha: ParamValue,
        beta: ParamValue,
        /// Attachment coordinates along the span, m.
        attach: Vec<f64>,
    },
    /// Generic modal body: natural frequencies plus mode-shape values at the
    /// attachment points (rows = points, columns = modes), e.g. imported from
    /// an external mode-shape table.
    Modal {
        label: String,
        /// Natural frequencies, rad/s, ascending.
        omega: Vec<f64>,
        alpha: ParamValue,
        beta: ParamValue,
        /// `n_attach x n_modes` mode-shape values at coupling points.
        attach_shapes: Vec<Vec<f64>>,
    },
}

impl FlexBodyConfig {
    pub fn label(&self) -> &str {
        match self {
            FlexBodyConfig::EulerBeam { label, .. } => label,
            FlexBodyConfig::Modal { label, .. } => label,
        }
    }

    pub fn n_modes(&self) -> usize {
        match self {
            FlexBodyConfig::EulerBeam { n_modes, .. } => *n_modes,
            FlexBodyConfig::Modal { omega, .. } => omega.len(),
        }
    }

    fn n_attach(&self) -> usize {
        match self {
            FlexBodyConfig::EulerBeam { attach, .. } => attach.len(),
            FlexBodyConfig::Modal { attach_shapes, .. } => attach_shapes.len(),
        }
    }

    /// (omega^2, damping coefficients, attachment shape rows).
    fn resolve(&self, params: &ParamMap) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
        match self {
            FlexBodyConfig::EulerBeam {
                mass_per_length,
                length,
                ei,
                n_modes,
                alpha,
                beta,
                attach,
                ..
            } => {
                let m_r = mass_per_length.resolve(params)?;
                let ei = ei.resolve(params)?;
                let alpha = alpha.resolve(params)?;
                let beta = beta.resolve(params)?;
                if m_r <= 0.0 || ei <= 0.0 || *length <= 0.0 {
                    return Err(Error::invalid(
                        "euler beam requires positive mass_per_length, ei, length",
                    ));
                }
                let speed = (ei / m_r).sqrt();
                let omega2: Vec<f64> = (1..=*n_modes)
                    .map(|k| {
                        let lam = (k as f64 * std::f64::consts::PI / length).powi(2);
                        (lam * speed).powi(2)
                    })
                    .collect();
                let damping: Vec<f64> = omega2.iter().map(|w2| alpha + beta * w2).collect();
                let table = modal::euler_beam_modes(m_r, *length, *n_modes, attach)?;
                let shapes: Vec<Vec<f64>> = (0..attach.len())
                    .map(|i| table.values.row(i).to_vec())
                    .collect();
                Ok((omega2, damping, shapes))
            }
            FlexBodyConfig::Modal {
                omega,
                alpha,
                beta,
                attach_shapes,
                ..
            } => {
                let alpha = alpha.resolve(params)?;
                let beta = beta.resolve(params)?;
                let omega2: Vec<f64> = omega.iter().map(|w| w * w).collect();
                let damping: Vec<f64> = omega2.iter().map(|w2| alpha + beta * w2).collect();
                for row in attach_shapes {
                    if row.len() != omega.len() {
                        return Err(Error::invalid(format!(
                            "attach_shapes row has {} entries, expected {}",
                            row.len(),
                            omega.len()
                        )));
                    }
                }
                Ok((omega2, damping, attach_shapes.clone()))
            }
        }
    }
}

/// One end of a spring/dashpot or the application point of a load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "at", rename_all = "snake_case", deny_unknown_fields)]
pub enum Endpoint {
    Ground,
    Mass {
        label: String,
        /// DOF index within the mass, for multi-DOF masses.
        #[serde(default)]
        dof: usize,
    },
    /// Attachment point `point` (index into the body's attach list).
    Flex { body: String, point: usize },
}

/// Spring and/or dashpot between two endpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionConfig {
    pub from: Endpoint,
    pub to: Endpoint,
    #[serde(default = "ParamValue::zero")]
    pub stiffness: ParamValue,
    #[serde(default = "ParamValue::zero")]
    pub damping: ParamValue,
}

impl ParamValue {
    fn zero() -> Self {
        ParamValue::Const(0.0)
    }
}

/// Excitation applied at an endpoint. Entries default to their own channel
/// (entry index); several entries may name the same `channel` to distribute
/// one excitation over multiple points.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    pub endpoint: Endpoint,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub channel: Option<usize>,
}

fn default_scale() -> f64 {
    1.0
}

/// Template for a coupled system; resolved against a parameter map at
/// assembly time.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default)]
    pub masses: Vec<MassConfig>,
    #[serde(default)]
    pub flexible: Vec<FlexBodyConfig>,
    #[serde(default)]
    pub connections: Vec<ConnectionConfig>,
    /// One entry per excitation channel, in channel order.
    #[serde(default)]
    pub loads: Vec<LoadConfig>,
}

impl SystemConfig {
    pub fn rigid_dofs(&self) -> usize {
        self.masses.iter().map(|m| m.dofs).sum()
    }

    pub fn n_dof(&self) -> usize {
        self.rigid_dofs() + self.flexible.iter().map(|b| b.n_modes()).sum::<usize>()
    }

    /// Influence coefficients of an endpoint: the DOF-space vector `g` such
    /// that the endpoint displacement is `g . u`.
    fn endpoint_coefficients(
        &self,
        endpoint: &Endpoint,
        shapes: &[Vec<Vec<f64>>],
        n_dof: usize,
    ) -> Result<Vec<f64>> {
        let mut g = vec![0.0; n_dof];
        match endpoint {
            Endpoint::Ground => {}
            Endpoint::Mass { label, dof } => {
                let idx = self
                    .masses
                    .iter()
                    .position(|m| &m.label == label)
                    .ok_or_else(|| Error::invalid(format!("unknown mass '{label}'")))?;
                if *dof >= self.masses[idx].dofs {
                    return Err(Error::invalid(format!(
                        "mass '{label}' has no DOF {dof}"
                    )));
                }
                let offset: usize = self.masses[..idx].iter().map(|m| m.dofs).sum();
                g[offset + dof] = 1.0;
            }
            Endpoint::Flex { body, point } => {
                let b = self
                    .flexible
                    .iter()
                    .position(|f| f.label() == body)
                    .ok_or_else(|| Error::invalid(format!("unknown flexible body '{body}'")))?;
                if *point >= self.flexible[b].n_attach() {
                    return Err(Error::invalid(format!(
                        "body '{body}' has no attachment point {point}"
                    )));
                }
                let offset = self.rigid_dofs()
                    + self.flexible[..b].iter().map(|f| f.n_modes()).sum::<usize>();
                for (i, phi) in shapes[b][*point].iter().enumerate() {
                    g[offset + i] = *phi;
                }
            }
        }
        Ok(g)
    }
}

/// Assemble `M`, `C`, `K` and the force map from a configuration.
///
/// Springs between endpoints contribute `k (g_a - g_b)(g_a - g_b)^T` to the
/// stiffness matrix (`+k` on both diagonals, `-k` off-diagonal in the rigid
/// case); dashpots contribute analogously to the damping matrix. Flexible
/// bodies appear as diagonal modal blocks with unit modal mass.
pub fn build_system(config: &SystemConfig, params: &ParamMap) -> Result<SecondOrderSystem> {
    let n_rigid = config.rigid_dofs();
    let n_dof = config.n_dof();
    if n_dof == 0 {
        return Err(Error::invalid("system has no DOFs"));
    }
    let mut m = Array2::<f64>::zeros((n_dof, n_dof));
    let mut c = Array2::<f64>::zeros((n_dof, n_dof));
    let mut k = Array2::<f64>::zeros((n_dof, n_dof));
    let mut labels = Vec::with_capacity(n_dof);

    let mut row = 0usize;
    for mass in &config.masses {
        let value = mass.mass.resolve(params)?;
        if value <= 0.0 {
            return Err(Error::invalid(format!(
                "mass '{}' must be positive, got {value}",
                mass.label
            )));
        }
        if mass.dofs == 0 {
            return Err(Error::invalid(format!(
                "mass '{}' must carry at least one DOF",
                mass.label
            )));
        }
        for d in 0..mass.dofs {
            m[[row, row]] = value;
            labels.push(if mass.dofs == 1 {
                mass.label.clone()
            } else {
                let axis = ["x", "y", "z"];
                if mass.dofs <= 3 {
                    format!("{}.{}", mass.label, axis[d])
                } else {
                    format!("{}.d{}", mass.label, d)
                }
            });
            row += 1;
        }
    }

    let mut flex_blocks = Vec::new();
    let mut shapes: Vec<Vec<Vec<f64>>> = Vec::with_capacity(config.flexible.len());
    let mut offset = n_rigid;
    for body in &config.flexible {
        let (omega2, damping, attach_shapes) = body.resolve(params)?;
        let n_modes = omega2.len();
        for (i, (w2, d)) in omega2.iter().zip(damping.iter()).enumerate() {
            m[[offset + i, offset + i]] = 1.0;
            k[[offset + i, offset + i]] = *w2;
            c[[offset + i, offset + i]] = *d;
            labels.push(format!("{}.mode_{}", body.label(), i + 1));
        }
        flex_blocks.push((body.label().to_string(), offset, n_modes));
        shapes.push(attach_shapes);
        offset += n_modes;
    }

    for conn in &config.connections {
        let ga = config.endpoint_coefficients(&conn.from, &shapes, n_dof)?;
        let gb = config.endpoint_coefficients(&conn.to, &shapes, n_dof)?;
        if conn.from == conn.to {
            return Err(Error::invalid("connection joins an endpoint to itself"));
        }
        let stiff = conn.stiffness.resolve(params)?;
        let damp = conn.damping.resolve(params)?;
        if stiff < 0.0 || damp < 0.0 {
            return Err(Error::invalid(
                "connection stiffness/damping must be nonnegative",
            ));
        }
        let diff: Vec<f64> = ga.iter().zip(gb.iter()).map(|(a, b)| a - b).collect();
        for i in 0..n_dof {
            if diff[i] == 0.0 {
                continue;
            }
            for j in 0..n_dof {
                if diff[j] == 0.0 {
                    continue;
                }
                k[[i, j]] += stiff * diff[i] * diff[j];
                c[[i, j]] += damp * diff[i] * diff[j];
            }
        }
    }

    let n_channels = config
        .loads
        .iter()
        .enumerate()
        .map(|(i, l)| l.channel.unwrap_or(i) + 1)
        .max()
        .unwrap_or(0);
    let mut force_map = Array2::<f64>::zeros((n_dof, n_channels));
    for (i_load, load) in config.loads.iter().enumerate() {
        let ch = load.channel.unwrap_or(i_load);
        let g = config.endpoint_coefficients(&load.endpoint, &shapes, n_dof)?;
        for i in 0..n_dof {
            force_map[[i, ch]] += load.scale * g[i];
        }
    }

    // M must be SPD; with point masses and unit modal masses this reduces to
    // positive diagonal entries, but verify generally.
    linalg::cholesky(&m).map_err(|_| {
        Error::NotPositiveDefinite("assembled mass matrix is not positive definite".into())
    })?;

    Ok(SecondOrderSystem {
        n_dof,
        m,
        c,
        k,
        force_map,
        labels,
        rigid_count: n_rigid,
        flex_blocks,
    })
}
