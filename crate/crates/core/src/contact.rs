//! Spring-damper contact between the horns and the wall.
//!
//! Each planar horn stands for a left/right pair of physical horns, so its
//! stiffness, damping and failure energy are the per-horn values times the
//! pair count. The horn tip is a point contact that only pushes along `-x`
//! (no adhesion), with regularized Coulomb friction along the wall.

use serde::{Deserialize, Serialize};

use crate::dynamics::{body_point_velocity, body_to_world, rotate_body, VehicleState, Wall, Wrench};

/// Horns per planar horn (left and right).
pub const PAIR_COUNT: f64 = 2.0;

/// Friction regularization velocity, m/s.
pub const FRICTION_V_REG: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HornRow {
    Upper,
    Lower,
}

impl HornRow {
    pub fn as_str(self) -> &'static str {
        match self {
            HornRow::Upper => "upper",
            HornRow::Lower => "lower",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    /// TPU
    Soft,
    /// PLA
    Hard,
}

/// Per-horn material constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialPreset {
    /// N/m
    pub stiffness: f64,
    /// N s/m
    pub damping: f64,
    /// J absorbed before the horn breaks; infinite (omitted) for materials that never fail.
    #[serde(with = "infinite_as_none", default = "never_fails")]
    pub failure_energy: f64,
}

pub fn material_preset(material: Material) -> MaterialPreset {
    match material {
        Material::Soft => MaterialPreset {
            stiffness: 280.0,
            damping: 1.4,
            failure_energy: f64::INFINITY,
        },
        Material::Hard => MaterialPreset {
            stiffness: 1200.0,
            damping: 0.3,
            failure_energy: 1.1,
        },
    }
}

fn never_fails() -> f64 {
    f64::INFINITY
}

mod infinite_as_none {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Horn {
    pub id: String,
    pub row: HornRow,
    /// Tip position in the body frame at rest, m.
    pub attach_body: (f64, f64),
    /// N/m
    pub k: f64,
    /// Cubic hardening coefficient, N/m^3. Zero gives a linear spring.
    pub k_cubic: f64,
    /// N s/m
    pub c: f64,
    pub max_deflection: f64,
    pub material: Material,
    pub failure_energy: f64,
    pub damage_enabled: bool,
    pub absorbed_energy: f64,
    pub failed: bool,
}

impl Horn {
    pub fn spring_force(&self, deflection: f64) -> f64 {
        self.k * deflection + self.k_cubic * deflection.powi(3)
    }

    pub fn spring_energy(&self, deflection: f64) -> f64 {
        0.5 * self.k * deflection * deflection + 0.25 * self.k_cubic * deflection.powi(4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConfigurationName {
    /// Upper and lower TPU horns.
    #[serde(rename = "full_soft", alias = "FullSoft")]
    FullSoft,
    /// Upper TPU horns only.
    #[serde(rename = "half_soft", alias = "HalfSoft")]
    HalfSoft,
    /// Upper and lower PLA horns.
    #[serde(rename = "full_hard", alias = "FullHard")]
    FullHard,
}

impl ConfigurationName {
    pub const ALL: [ConfigurationName; 3] = [
        ConfigurationName::FullSoft,
        ConfigurationName::HalfSoft,
        ConfigurationName::FullHard,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConfigurationName::FullSoft => "full_soft",
            ConfigurationName::HalfSoft => "half_soft",
            ConfigurationName::FullHard => "full_hard",
        }
    }

    pub fn material(self) -> Material {
        match self {
            ConfigurationName::FullSoft | ConfigurationName::HalfSoft => Material::Soft,
            ConfigurationName::FullHard => Material::Hard,
        }
    }

    pub fn has_lower(self) -> bool {
        !matches!(self, ConfigurationName::HalfSoft)
    }
}

impl std::fmt::Display for ConfigurationName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ConfigurationName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "fullsoft" => Ok(ConfigurationName::FullSoft),
            "halfsoft" => Ok(ConfigurationName::HalfSoft),
            "fullhard" => Ok(ConfigurationName::FullHard),
            _ => Err(format!(
                "unknown horn configuration `{s}` (expected full_soft, half_soft or full_hard)"
            )),
        }
    }
}

/// Tunable horn geometry and material constants used to build configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HornSettings {
    pub upper_tip: (f64, f64),
    pub lower_tip: (f64, f64),
    pub max_deflection: f64,
    pub soft: MaterialPreset,
    pub hard: MaterialPreset,
    /// Cubic hardening, per physical horn, N/m^3.
    pub k_cubic: f64,
    /// Accumulate impact energy on hard horns and break them past the limit.
    pub damage: bool,
}

impl Default for HornSettings {
    fn default() -> Self {
        Self {
            upper_tip: (0.11, 0.12),
            lower_tip: (0.11, -0.12),
            max_deflection: 0.03,
            soft: material_preset(Material::Soft),
            hard: material_preset(Material::Hard),
            k_cubic: 0.0,
            damage: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HornConfiguration {
    pub name: ConfigurationName,
    pub horns: Vec<Horn>,
}

impl HornConfiguration {
    pub fn preset(name: ConfigurationName) -> Self {
        Self::build(name, &HornSettings::default())
    }

    pub fn build(name: ConfigurationName, settings: &HornSettings) -> Self {
        let material = name.material();
        let preset = match material {
            Material::Soft => settings.soft,
            Material::Hard => settings.hard,
        };
        let make = |row: HornRow, tip: (f64, f64)| Horn {
            id: row.as_str().to_string(),
            row,
            attach_body: tip,
            k: PAIR_COUNT * preset.stiffness,
            k_cubic: PAIR_COUNT * settings.k_cubic,
            c: PAIR_COUNT * preset.damping,
            max_deflection: settings.max_deflection,
            material,
            failure_energy: PAIR_COUNT * preset.failure_energy,
            damage_enabled: settings.damage && material == Material::Hard,
            absorbed_energy: 0.0,
            failed: false,
        };
        let mut horns = vec![make(HornRow::Upper, settings.upper_tip)];
        if name.has_lower() {
            horns.push(make(HornRow::Lower, settings.lower_tip));
        }
        Self { name, horns }
    }

    pub fn horn(&self, row: HornRow) -> Option<&Horn> {
        self.horns.iter().find(|h| h.row == row)
    }

    /// Stored elastic energy in all unfailed horns.
    pub fn spring_energy(&self, state: &VehicleState, wall: &Wall) -> f64 {
        self.horns
            .iter()
            .filter(|h| !h.failed)
            .map(|h| h.spring_energy(compute_deflection(h, state, wall).depth))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Deflection {
    /// Penetration of the tip past the wall plane, m (never negative).
    pub depth: f64,
    /// d(depth)/dt while in contact, else 0.
    pub rate: f64,
    /// Depth reached `max_deflection`: the horn is fully deformed.
    pub saturated: bool,
}

/// Penetration of one horn tip into the wall.
///
/// Depth is not clipped at `max_deflection`; past it the spring keeps acting
/// linearly and `saturated` is raised instead.
pub fn compute_deflection(horn: &Horn, state: &VehicleState, wall: &Wall) -> Deflection {
    let (tip_x, _) = body_to_world(horn.attach_body, state);
    let depth = tip_x - wall.x_wall;
    if depth <= 0.0 {
        return Deflection::default();
    }
    let (vx, _) = body_point_velocity(horn.attach_body, state);
    Deflection {
        depth,
        rate: vx,
        saturated: depth >= horn.max_deflection,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HornContact {
    pub deflection: f64,
    pub deflection_rate: f64,
    pub normal_force: f64,
    /// Vertical friction force on the vehicle, N.
    pub friction_force: f64,
    /// Vertical tip sliding velocity, m/s.
    pub slip_velocity: f64,
    pub in_contact: bool,
    pub saturated: bool,
}

impl HornContact {
    /// Power dissipated in the horn, W. Includes spring energy lost when the
    /// tip separates faster than the spring can follow.
    pub fn damping_power(&self, horn: &Horn) -> f64 {
        if self.in_contact {
            (self.normal_force - horn.spring_force(self.deflection)) * self.deflection_rate
        } else {
            0.0
        }
    }

    /// Power dissipated by friction, W (non-negative).
    pub fn friction_power(&self) -> f64 {
        -self.friction_force * self.slip_velocity
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ContactState {
    pub horns: Vec<HornContact>,
}

impl ContactState {
    pub fn any_contact(&self) -> bool {
        self.horns.iter().any(|h| h.in_contact)
    }
}

fn horn_contact(horn: &Horn, state: &VehicleState, wall: &Wall) -> (Wrench, HornContact) {
    let d = compute_deflection(horn, state, wall);
    if horn.failed || d.depth <= 0.0 {
        return (
            Wrench::ZERO,
            HornContact {
                deflection: if horn.failed { 0.0 } else { d.depth },
                ..HornContact::default()
            },
        );
    }
    let normal = (horn.spring_force(d.depth) + horn.c * d.rate).max(0.0);
    let (_, slip) = body_point_velocity(horn.attach_body, state);
    let friction = -wall.mu * normal * (slip / FRICTION_V_REG).tanh();
    let lever = rotate_body(horn.attach_body, state.theta);
    let wrench = Wrench::from_force_at((-normal, friction), lever);
    (
        wrench,
        HornContact {
            deflection: d.depth,
            deflection_rate: d.rate,
            normal_force: normal,
            friction_force: friction,
            slip_velocity: slip,
            in_contact: true,
            saturated: d.saturated,
        },
    )
}

/// Total wrench of all horns on the vehicle and the per-horn contact report.
pub fn contact_wrench(config: &HornConfiguration, state: &VehicleState, wall: &Wall) -> (Wrench, ContactState) {
    let mut total = Wrench::ZERO;
    let mut horns = Vec::with_capacity(config.horns.len());
    for horn in &config.horns {
        let (w, c) = horn_contact(horn, state, wall);
        total += w;
        horns.push(c);
    }
    (total, ContactState { horns })
}

/// Wrench only, for use inside integrator stages.
pub fn contact_wrench_only(config: &HornConfiguration, state: &VehicleState, wall: &Wall) -> Wrench {
    config
        .horns
        .iter()
        .map(|h| horn_contact(h, state, wall).0)
        .fold(Wrench::ZERO, |a, b| a + b)
}

/// Accumulates compression work on a horn and breaks hard horns past their limit.
pub fn update_damage(horn: &Horn, normal_force: f64, deflection_rate: f64, dt: f64) -> Horn {
    let mut next = horn.clone();
    if horn.failed || dt <= 0.0 {
        return next;
    }
    next.absorbed_energy += (normal_force * deflection_rate).max(0.0) * dt;
    if horn.damage_enabled && horn.material == Material::Hard && next.absorbed_energy > horn.failure_energy {
        next.failed = true;
    }
    next
}
