//! Zeeman splittings along the crystal b-axis and the fields at which
//! two-frequency repumping resonances occur.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeemanConfig {
    /// Ground (4f) splitting coefficient, Hz/T.
    pub g_ground: f64,
    /// Excited (5d) splitting coefficient, Hz/T.
    pub g_excited: f64,
    /// Stray field magnitude, T.
    pub stray_field: f64,
    /// +1 or -1: orientation of the applied field relative to the stray field.
    pub field_sign: f64,
}

impl Default for ZeemanConfig {
    fn default() -> Self {
        Self {
            g_ground: 19e9,
            g_excited: 25.5e9,
            stray_field: 0.2e-3,
            field_sign: 1.0,
        }
    }
}

impl ZeemanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.g_ground > 0.0 && self.g_excited > 0.0) {
            return Err(invalid("Zeeman coefficients must be > 0"));
        }
        if !self.stray_field.is_finite() {
            return Err(invalid("stray field must be finite"));
        }
        if self.field_sign != 1.0 && self.field_sign != -1.0 {
            return Err(invalid(format!(
                "field_sign must be +1 or -1, got {}",
                self.field_sign
            )));
        }
        Ok(())
    }
}

/// Field seen by the ions for a given coil field.
pub fn total_field(applied: f64, cfg: &ZeemanConfig) -> f64 {
    applied + cfg.field_sign * cfg.stray_field
}

/// Coil field needed for a given total field.
pub fn applied_field(total: f64, cfg: &ZeemanConfig) -> f64 {
    total - cfg.field_sign * cfg.stray_field
}

/// (Δf_4f, Δf_5d) in Hz.
pub fn splittings(b_total: f64, cfg: &ZeemanConfig) -> (f64, f64) {
    (cfg.g_ground * b_total.abs(), cfg.g_excited * b_total.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subgroup {
    A,
    B,
    C,
    D,
}

/// For each subgroup, the line driven by the laser and the cross transition
/// from the other ground level to the other excited level, Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubgroupLines {
    pub a: (f64, f64),
    pub b: (f64, f64),
    pub c: (f64, f64),
    pub d: (f64, f64),
}

impl SubgroupLines {
    pub fn get(&self, g: Subgroup) -> (f64, f64) {
        match g {
            Subgroup::A => self.a,
            Subgroup::B => self.b,
            Subgroup::C => self.c,
            Subgroup::D => self.d,
        }
    }

    pub fn separation(&self, g: Subgroup) -> f64 {
        let (x, y) = self.get(g);
        (y - x).abs()
    }
}

/// Ground levels at ±Δf_4f/2 and excited levels at ±Δf_5d/2 about each
/// subgroup's centre; each subgroup is the class of ions for which one of the
/// four transitions sits at `f_laser`.
///
/// A: laser on g+ → e-, partner g- → e+ (f_laser + Δ4 + Δ5)
/// B: laser on g+ → e+, partner g- → e- (f_laser + Δ4 - Δ5)
/// C: laser on g- → e-, partner g+ → e+ (f_laser - Δ4 + Δ5)
/// D: laser on g- → e+, partner g+ → e- (f_laser - Δ4 - Δ5)
pub fn subgroup_lines(f_laser: f64, b_total: f64, cfg: &ZeemanConfig) -> SubgroupLines {
    let (d4, d5) = splittings(b_total, cfg);
    SubgroupLines {
        a: (f_laser, f_laser + d4 + d5),
        b: (f_laser, f_laser + d4 - d5),
        c: (f_laser, f_laser - d4 + d5),
        d: (f_laser, f_laser - d4 - d5),
    }
}

/// A resonance field expressed both as total field and as coil field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldPair {
    pub total: f64,
    pub applied: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceFields {
    /// Δf_laser = Δf_4f.
    pub ground: FieldPair,
    /// Δf_laser = Δf_4f + Δf_5d.
    pub sum: FieldPair,
    /// Δf_laser = |Δf_4f - Δf_5d|; absent when the coefficients are equal.
    pub diff: Option<FieldPair>,
}

/// Fields (positive total-field branch) at which a two-frequency laser with
/// separation `delta_f_laser` repumps.
pub fn resonance_fields(delta_f_laser: f64, cfg: &ZeemanConfig) -> Result<ResonanceFields> {
    cfg.validate()?;
    if !(delta_f_laser.is_finite() && delta_f_laser > 0.0) {
        return Err(invalid(format!(
            "laser separation must be > 0, got {delta_f_laser}"
        )));
    }
    let pair = |total: f64| FieldPair {
        total,
        applied: applied_field(total, cfg),
    };
    let gdiff = (cfg.g_ground - cfg.g_excited).abs();
    Ok(ResonanceFields {
        ground: pair(delta_f_laser / cfg.g_ground),
        sum: pair(delta_f_laser / (cfg.g_ground + cfg.g_excited)),
        diff: (gdiff > 0.0).then(|| pair(delta_f_laser / gdiff)),
    })
}
