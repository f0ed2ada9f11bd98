//! Material model and energy-dependent transport coefficients: Bethe stopping
//! power, straggling coefficient, screened-Rutherford momentum transfer cross
//! section, and their group tables.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beam::{GL8_W, GL8_X};
use crate::grid::EnergyGrid;

/// Proton rest energy (MeV).
pub const PROTON_MASS_MEV: f64 = 938.272;
/// Electron rest energy (MeV).
pub const ELECTRON_MASS_MEV: f64 = 0.511;
/// 4π N_A r_e² m_e c² (MeV cm²/g).
pub const KAPPA: f64 = 0.307;
/// e²/(4πε₀) in MeV·cm.
pub const COULOMB_MEV_CM: f64 = 1.439_964_5e-13;
/// Atomic mass unit rest energy (MeV).
pub const AMU_MEV: f64 = 931.494;
pub const AVOGADRO: f64 = 6.022_140_76e23;
pub const FINE_STRUCTURE: f64 = 1.0 / 137.035_999;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhysicsError {
    #[error("atomic number must be at least 1")]
    InvalidZ,
    #[error("kinetic energy must be positive, got {0} MeV")]
    NonPositiveEnergy(f64),
    #[error("material '{name}': {reason}")]
    InvalidMaterial { name: String, reason: String },
    #[error("unknown element symbol '{0}'")]
    UnknownElement(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub symbol: String,
    pub z: u32,
    /// Molar mass (g/mol).
    pub a: f64,
}

const ELEMENTS: &[(&str, u32, f64)] = &[
    ("H", 1, 1.008),
    ("He", 2, 4.0026),
    ("C", 6, 12.011),
    ("N", 7, 14.007),
    ("O", 8, 15.999),
    ("F", 9, 18.998),
    ("Na", 11, 22.990),
    ("Mg", 12, 24.305),
    ("Al", 13, 26.982),
    ("Si", 14, 28.085),
    ("P", 15, 30.974),
    ("S", 16, 32.06),
    ("Cl", 17, 35.45),
    ("Ar", 18, 39.948),
    ("K", 19, 39.098),
    ("Ca", 20, 40.078),
    ("Fe", 26, 55.845),
    ("Zn", 30, 65.38),
    ("I", 53, 126.90),
    ("Pb", 82, 207.2),
];

impl Element {
    pub fn new(symbol: &str, z: u32, a: f64) -> Self {
        Self { symbol: symbol.to_string(), z, a }
    }

    /// Looks up a built-in element by its chemical symbol.
    pub fn by_symbol(symbol: &str) -> Result<Self, PhysicsError> {
        ELEMENTS
            .iter()
            .find(|(s, _, _)| s.eq_ignore_ascii_case(symbol))
            .map(|&(s, z, a)| Element::new(s, z, a))
            .ok_or_else(|| PhysicsError::UnknownElement(symbol.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub element: Element,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// Nominal density (g/cm³).
    pub density: f64,
    pub components: Vec<Component>,
}

impl Material {
    /// Builds a material whose weight fractions must already sum to one
    /// (within 1e-6); they are rescaled to sum exactly.
    pub fn new(name: &str, density: f64, components: Vec<Component>) -> Result<Self, PhysicsError> {
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(invalid(name, format!("weight fractions sum to {total}, expected 1")));
        }
        Self::normalized(name, density, components)
    }

    /// Builds a material from arbitrary positive weights, rescaling them to sum to one.
    pub fn normalized(name: &str, density: f64, mut components: Vec<Component>) -> Result<Self, PhysicsError> {
        if !(density > 0.0) || !density.is_finite() {
            return Err(invalid(name, format!("density must be positive, got {density}")));
        }
        if components.is_empty() {
            return Err(invalid(name, "no components".into()));
        }
        for c in &components {
            if c.element.z == 0 {
                return Err(PhysicsError::InvalidZ);
            }
            if !(c.weight >= 0.0) || !c.weight.is_finite() {
                return Err(invalid(name, format!("negative weight for {}", c.element.symbol)));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if !(total > 0.0) {
            return Err(invalid(name, "weights sum to zero".into()));
        }
        for c in &mut components {
            c.weight /= total;
        }
        Ok(Self { name: name.to_string(), density, components })
    }

    /// Convenience constructor from `(symbol, weight)` pairs of built-in elements.
    pub fn from_symbols(name: &str, density: f64, parts: &[(&str, f64)]) -> Result<Self, PhysicsError> {
        let components = parts
            .iter()
            .map(|&(s, w)| Ok(Component { element: Element::by_symbol(s)?, weight: w }))
            .collect::<Result<Vec<_>, PhysicsError>>()?;
        Self::new(name, density, components)
    }

    pub fn water() -> Self {
        Self::from_symbols("water", 1.0, &[("H", 0.1111), ("O", 0.8889)]).unwrap()
    }

    pub fn bone() -> Self {
        Self::from_symbols(
            "bone",
            1.757,
            &[
                ("H", 0.042),
                ("C", 0.194),
                ("N", 0.04),
                ("O", 0.425),
                ("Na", 0.001),
                ("Mg", 0.002),
                ("P", 0.092),
                ("S", 0.003),
                ("Ca", 0.201),
            ],
        )
        .unwrap()
    }

    pub fn air() -> Self {
        // tabulated fractions sum to 1.00005; renormalized
        let parts = [("C", 0.0001248), ("N", 0.7553), ("O", 0.2318), ("Ar", 0.01283)];
        let comps = parts
            .iter()
            .map(|&(s, w)| Component { element: Element::by_symbol(s).unwrap(), weight: w })
            .collect();
        Self::normalized("air", 0.001205, comps).unwrap()
    }

    /// Built-in materials by name: water, bone, air.
    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "water" => Some(Self::water()),
            "bone" => Some(Self::bone()),
            "air" => Some(Self::air()),
            _ => None,
        }
    }

    /// Mixture by mass: a fraction `wa` of `a` and `1 - wa` of `b`.
    /// Density follows additive specific volumes.
    pub fn mix(name: &str, a: &Material, wa: f64, b: &Material) -> Result<Self, PhysicsError> {
        if !(0.0..=1.0).contains(&wa) {
            return Err(invalid(name, format!("mixing fraction {wa} outside [0, 1]")));
        }
        let wb = 1.0 - wa;
        let mut comps: Vec<Component> = Vec::new();
        for (m, w) in [(a, wa), (b, wb)] {
            for c in &m.components {
                match comps.iter_mut().find(|x| x.element == c.element) {
                    Some(x) => x.weight += w * c.weight,
                    None => comps.push(Component { element: c.element.clone(), weight: w * c.weight }),
                }
            }
        }
        let density = 1.0 / (wa / a.density + wb / b.density);
        Self::normalized(name, density, comps)
    }
}

fn invalid(name: &str, reason: String) -> PhysicsError {
    PhysicsError::InvalidMaterial { name: name.to_string(), reason }
}

/// Mean excitation energy in eV from the empirical three-branch fit in Z.
pub fn mean_excitation_energy_ev(z: u32) -> Result<f64, PhysicsError> {
    match z {
        0 => Err(PhysicsError::InvalidZ),
        1 => Ok(19.0),
        2..=13 => Ok(11.2 + 11.7 * z as f64),
        _ => Ok(52.8 + 8.71 * z as f64),
    }
}

pub fn lorentz_gamma(e: f64) -> f64 {
    (e + PROTON_MASS_MEV) / PROTON_MASS_MEV
}

pub fn beta_squared(e: f64) -> f64 {
    let g = lorentz_gamma(e);
    1.0 - 1.0 / (g * g)
}

/// Momentum times c (MeV).
pub fn momentum_mev(e: f64) -> f64 {
    (e * e + 2.0 * e * PROTON_MASS_MEV).sqrt()
}

fn check_energy(e: f64) -> Result<(), PhysicsError> {
    if e > 0.0 && e.is_finite() {
        Ok(())
    } else {
        Err(PhysicsError::NonPositiveEnergy(e))
    }
}

/// Mass stopping power with a flag raised when any element's Bethe bracket
/// went non-positive and was clamped to zero.
pub fn stopping_power_flagged(material: &Material, e: f64) -> Result<(f64, bool), PhysicsError> {
    check_energy(e)?;
    let b2 = beta_squared(e);
    let g = lorentz_gamma(e);
    let mut total = 0.0;
    let mut clamped = false;
    for c in &material.components {
        let i_mev = mean_excitation_energy_ev(c.element.z)? * 1e-6;
        let bracket = (2.0 * ELECTRON_MASS_MEV * b2 * g * g / i_mev).ln() - b2;
        if bracket <= 0.0 {
            clamped = true;
            continue;
        }
        total += c.weight * KAPPA * c.element.z as f64 / c.element.a / b2 * bracket;
    }
    Ok((total, clamped))
}

/// Mass stopping power S(E) in MeV·cm²/g, no density-effect or shell corrections.
pub fn stopping_power(material: &Material, e: f64) -> Result<f64, PhysicsError> {
    stopping_power_flagged(material, e).map(|(s, _)| s)
}

/// Energy straggling coefficient T(E) in MeV²·cm²/g.
pub fn straggling(material: &Material, e: f64) -> Result<f64, PhysicsError> {
    check_energy(e)?;
    let x = ELECTRON_MASS_MEV * beta_squared(e);
    let mut total = 0.0;
    for c in &material.components {
        let i_mev = mean_excitation_energy_ev(c.element.z)? * 1e-6;
        let log = (2.0 * x / i_mev).ln().max(0.0);
        let corr = 1.0 + 4.0 * i_mev / (3.0 * x) * log;
        total += c.weight * KAPPA * ELECTRON_MASS_MEV * c.element.z as f64 / c.element.a * corr;
    }
    Ok(total)
}

/// Screened-Rutherford momentum transfer cross section per unit mass (cm²/g),
/// with Molière-type screening parameter and target-recoil reduced mass.
pub fn momentum_transfer_xs(material: &Material, e: f64) -> Result<f64, PhysicsError> {
    check_energy(e)?;
    let b2 = beta_squared(e);
    let pc = momentum_mev(e);
    let mut total = 0.0;
    for c in &material.components {
        let z = c.element.z as f64;
        let m_target = c.element.a * AMU_MEV;
        let m_red = PROTON_MASS_MEV * m_target / (PROTON_MASS_MEV + m_target);
        let eta = (z.cbrt() * FINE_STRUCTURE * ELECTRON_MASS_MEV / pc).powi(2);
        let amp = z * COULOMB_MEV_CM / (m_red * b2);
        let per_atom = 2.0
            * std::f64::consts::PI
            * amp
            * amp
            * (((eta + 1.0) / eta).ln() - 1.0 / (eta + 1.0));
        total += c.weight * per_atom * AVOGADRO / c.element.a;
    }
    Ok(total)
}

/// Per-material coefficient tables on an energy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsTables {
    /// S at the G+1 group edges (MeV cm²/g).
    pub stopping_edges: Vec<f64>,
    /// T at the G group centres (MeV² cm²/g).
    pub straggling: Vec<f64>,
    /// Group-averaged momentum transfer cross section (cm²/g).
    pub transport_xs: Vec<f64>,
    /// Catastrophic removal cross section per group (1/cm at nominal density).
    pub removal_xs: Vec<f64>,
    /// True if any stopping-power evaluation was clamped.
    pub clamped: bool,
}

impl PhysicsTables {
    pub fn with_removal(mut self, removal_xs: Vec<f64>) -> Self {
        assert_eq!(removal_xs.len(), self.straggling.len(), "removal table length");
        self.removal_xs = removal_xs;
        self
    }
}

/// Average of `f` over [a, b] by 8-point Gauss-Legendre on four panels.
fn group_average(f: impl Fn(f64) -> Result<f64, PhysicsError>, a: f64, b: f64) -> Result<f64, PhysicsError> {
    const PANELS: usize = 4;
    let pw = (b - a) / PANELS as f64;
    let mut acc = 0.0;
    for k in 0..PANELS {
        let mid = a + (k as f64 + 0.5) * pw;
        for (x, w) in GL8_X.iter().zip(GL8_W.iter()) {
            acc += w * f(mid + 0.5 * pw * x)?;
        }
    }
    Ok(acc / (2.0 * PANELS as f64))
}

pub fn build_tables(material: &Material, grid: &EnergyGrid) -> Result<PhysicsTables, PhysicsError> {
    let mut clamped = false;
    let mut stopping_edges = Vec::with_capacity(grid.groups() + 1);
    for &e in grid.edges() {
        let (s, c) = stopping_power_flagged(material, e)?;
        clamped |= c;
        stopping_edges.push(s);
    }
    let straggling = (0..grid.groups())
        .map(|g| straggling(material, grid.center(g)))
        .collect::<Result<Vec<_>, _>>()?;
    let transport_xs = (0..grid.groups())
        .map(|g| group_average(|e| momentum_transfer_xs(material, e), grid.lower(g), grid.upper(g)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PhysicsTables {
        stopping_edges,
        straggling,
        transport_xs,
        removal_xs: vec![0.0; grid.groups()],
        clamped,
    })
}
