//! On-disk scenario format. Every physical quantity carries its unit in the
//! key name and unknown keys are rejected.

use formation_core::cyclic::CyclicParams;
use formation_core::extensions::center::CenterParams;
use formation_core::extensions::collision::{CollisionParams, CollisionVariant};
use formation_core::extensions::size::{Shaping, SizeParams};
use formation_core::linalg::Rotation3;
use formation_core::polyhedron::{extract_minimal_pps, Development, Face, PolyhedronFormation};
use formation_core::quad::{QuadParams, TrackerGains};
use formation_core::sim::montecarlo::{ConvergenceCriteria, MonteCarloConfig};
use formation_core::sim::{Agents, Controllers, Disturbance, FormationKind, Integrator, Scenario, SimSettings};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

type V3 = [f64; 3];

fn v3(a: V3) -> Vector3<f64> {
    Vector3::from(a)
}

fn arr(v: &Vector3<f64>) -> V3 {
    [v.x, v.y, v.z]
}

fn diag(m: &Matrix3<f64>, what: &str) -> Result<V3, CliError> {
    let off = (0..3).flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j)));
    if off.into_iter().any(|(i, j)| m[(i, j)] != 0.0) {
        return Err(CliError::Schema(format!("{what} must be diagonal to be written to a scenario file")));
    }
    Ok([m[(0, 0)], m[(1, 1)], m[(2, 2)]])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub meta: Meta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<PolygonSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polyhedron: Option<PolyhedronSection>,
    pub agents: AgentsSection,
    pub initial: InitialSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<SizeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<CenterSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision: Option<CollisionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<DisturbanceSection>,
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub montecarlo: Option<MonteCarloSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Figure this scenario reproduces, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonSection {
    pub n: usize,
    /// `k_m` for `m = 1..=N`, in 1/s.
    pub gains_per_s: Vec<f64>,
    /// Defaults to `mπ/n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles_rad: Option<Vec<f64>>,
    pub plane_axis: V3,
    pub plane_angle_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyhedronSection {
    pub gain_per_s: f64,
    pub horizon: usize,
    pub root_face: usize,
    /// Size control on the root face with fixed-size followers.
    #[serde(default)]
    pub size_mode: bool,
    pub faces: Vec<FaceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceEntry {
    /// Counterclockwise about `outward_normal`.
    pub vertices: Vec<usize>,
    pub outward_normal: V3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentModel {
    PointMass,
    Quad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsSection {
    pub model: AgentModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max_mps: Option<f64>,
    /// Only read for the quad model; defaults apply when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad: Option<QuadSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSection {
    pub mass_kg: f64,
    pub inertia_kg_m2: V3,
    pub gravity_mps2: f64,
    pub kp_v_per_s: V3,
    pub ki_v_per_s2: V3,
    pub kd_v: V3,
    pub kp_att_nm_per_rad: V3,
    pub kd_att_nms_per_rad: V3,
    pub yaw_rad: f64,
    pub max_tilt_rad: f64,
    /// Thrust limits as multiples of hover thrust.
    pub thrust_floor_hover: f64,
    pub thrust_ceiling_hover: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub positions_m: Vec<V3>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapingName {
    Tanh,
    Saturation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeSection {
    pub rho_m: f64,
    pub alpha_s0_rad: f64,
    pub shaping: ShapingName,
    pub tau_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CenterSection {
    pub target_m: V3,
    pub k_c_per_s: f64,
    pub tau_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionSection {
    pub variant: CollisionVariant,
    pub r1_m: f64,
    pub r2_m: f64,
    #[serde(default)]
    pub k_coll_mps: f64,
    /// Reference spacing of the soft variant.
    #[serde(default)]
    pub rho_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSection {
    pub amplitude_rad: f64,
    pub window_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_bar_mps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt_s: f64,
    pub t_end_s: f64,
    pub integrator: Integrator,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_residual: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    pub samples: usize,
    pub radius_m: f64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_m: Option<V3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_separation_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<CriteriaSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaSection {
    pub formation_error: f64,
    pub side_error: f64,
    pub center_error_m: f64,
}

/// 1-based line and column of a byte offset.
pub fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

impl ScenarioFile {
    pub fn parse(src: &str) -> Result<Self, CliError> {
        toml::from_str(src).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(src, s.start));
            CliError::Parse { line, column, message: e.message().to_string() }
        })
    }

    pub fn emit(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Schema(e.to_string()))
    }

    pub fn to_scenario(&self) -> Result<Scenario, CliError> {
        let formation = match (&self.polygon, &self.polyhedron) {
            (Some(p), None) => {
                let plane = Rotation3::new(v3(p.plane_axis), p.plane_angle_rad)?;
                let cyclic = match &p.angles_rad {
                    Some(a) => CyclicParams::new(p.n, p.gains_per_s.clone(), a.clone(), plane)?,
                    None => {
                        let angles = formation_core::cyclic::fixed_size_angles(p.n, p.gains_per_s.len());
                        CyclicParams::new(p.n, p.gains_per_s.clone(), angles, plane)?
                    }
                };
                FormationKind::Polygon(cyclic)
            }
            (None, Some(h)) => {
                let faces = h
                    .faces
                    .iter()
                    .map(|f| Face::new(f.vertices.clone(), v3(f.outward_normal)))
                    .collect::<formation_core::Result<Vec<_>>>()?;
                if h.root_face >= faces.len() {
                    return Err(CliError::Schema(format!(
                        "root_face {} out of range for {} faces",
                        h.root_face,
                        faces.len()
                    )));
                }
                let d = Development::from_faces(faces);
                let pps = extract_minimal_pps(&d, h.root_face)?;
                let f = PolyhedronFormation::uniform(d, pps, h.gain_per_s, h.horizon)?;
                if h.size_mode {
                    FormationKind::PolyhedronSize(f)
                } else {
                    FormationKind::Polyhedron(f)
                }
            }
            (Some(_), Some(_)) => {
                return Err(CliError::Schema("give exactly one of [polygon] and [polyhedron], not both".into()))
            }
            (None, None) => return Err(CliError::Schema("missing [polygon] or [polyhedron] section".into())),
        };

        let agents = match self.agents.model {
            AgentModel::PointMass => {
                if self.agents.quad.is_some() {
                    return Err(CliError::Schema("[agents.quad] given for the point_mass model".into()));
                }
                Agents::PointMass { v_max: self.agents.v_max_mps }
            }
            AgentModel::Quad => {
                let (params, mut gains) = match &self.agents.quad {
                    Some(q) => (
                        QuadParams {
                            mass: q.mass_kg,
                            inertia: Matrix3::from_diagonal(&v3(q.inertia_kg_m2)),
                            gravity: q.gravity_mps2,
                        },
                        TrackerGains {
                            kp_v: v3(q.kp_v_per_s),
                            ki_v: v3(q.ki_v_per_s2),
                            kd_v: v3(q.kd_v),
                            kp_att: Matrix3::from_diagonal(&v3(q.kp_att_nm_per_rad)),
                            kd_att: Matrix3::from_diagonal(&v3(q.kd_att_nms_per_rad)),
                            yaw_desired: q.yaw_rad,
                            max_tilt: q.max_tilt_rad,
                            thrust_floor: q.thrust_floor_hover,
                            thrust_ceiling: q.thrust_ceiling_hover,
                            ..TrackerGains::default()
                        },
                    ),
                    None => (QuadParams::default(), TrackerGains::default()),
                };
                if let Some(v) = self.agents.v_max_mps {
                    gains.v_max = v;
                }
                Agents::Quad { params, gains }
            }
        };

        let size = self
            .size
            .as_ref()
            .map(|s| {
                let fs = match s.shaping {
                    ShapingName::Tanh => Shaping::Tanh,
                    ShapingName::Saturation => Shaping::Saturation,
                };
                SizeParams::new(s.rho_m, s.alpha_s0_rad, fs, s.tau_s)
            })
            .transpose()?;
        let center = self.center.as_ref().map(|c| CenterParams::new(v3(c.target_m), c.k_c_per_s, c.tau_s)).transpose()?;
        let collision = self
            .collision
            .as_ref()
            .map(|c| CollisionParams::new(c.r1_m, c.r2_m, c.variant, c.k_coll_mps, c.rho_m))
            .transpose()?;

        let mut sim = SimSettings::new(self.sim.dt_s, self.sim.t_end_s);
        sim.integrator = self.sim.integrator;
        sim.record_every = self.sim.record_every;
        sim.stop_residual = self.sim.stop_residual;

        let s = Scenario {
            formation,
            agents,
            initial: self.initial.positions_m.iter().map(|p| v3(*p)).collect(),
            controllers: Controllers { size, center, collision },
            sim,
            seed: self.sim.seed,
            disturbance: self.disturbance.as_ref().map(|d| Disturbance {
                amplitude: d.amplitude_rad,
                window: d.window_s,
                d_bar: d.d_bar_mps,
            }),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn monte_carlo_config(&self) -> Option<MonteCarloConfig> {
        self.montecarlo.as_ref().map(|m| MonteCarloConfig {
            samples: m.samples,
            radius: m.radius_m,
            center: m.center_m.map(v3),
            min_separation: m.min_separation_m,
            criteria: m.criteria.as_ref().map_or_else(ConvergenceCriteria::default, |c| ConvergenceCriteria {
                formation_error: c.formation_error,
                side_error: c.side_error,
                center_error: c.center_error_m,
            }),
            master_seed: m.master_seed,
        })
    }

    /// The file form of `s`. Custom shaping functions and non-diagonal
    /// inertia or attitude gains have no file representation.
    pub fn from_scenario(meta: Meta, s: &Scenario, mc: Option<&MonteCarloConfig>) -> Result<Self, CliError> {
        let (polygon, polyhedron) = match &s.formation {
            FormationKind::Polygon(p) => (
                Some(PolygonSection {
                    n: p.n,
                    gains_per_s: p.gains.clone(),
                    angles_rad: Some(p.angles.clone()),
                    plane_axis: arr(&p.plane_rotation.axis),
                    plane_angle_rad: p.plane_rotation.angle,
                }),
                None,
            ),
            FormationKind::Polyhedron(f) | FormationKind::PolyhedronSize(f) => {
                let first = &f.faces[0].params;
                if f.faces.iter().any(|fc| fc.params.gains != vec![first.gains[0]; first.horizon]) {
                    return Err(CliError::Schema("polyhedron faces must share one gain and horizon".into()));
                }
                let root_face = f.pps.faces[0];
                (
                    None,
                    Some(PolyhedronSection {
                        gain_per_s: first.gains[0],
                        horizon: first.horizon,
                        root_face,
                        size_mode: matches!(s.formation, FormationKind::PolyhedronSize(_)),
                        faces: f
                            .development
                            .faces
                            .iter()
                            .map(|face| FaceEntry { vertices: face.vertex_ids.clone(), outward_normal: arr(&face.normal) })
                            .collect(),
                    }),
                )
            }
        };
        let agents = match &s.agents {
            Agents::PointMass { v_max } => AgentsSection { model: AgentModel::PointMass, v_max_mps: *v_max, quad: None },
            Agents::Quad { params, gains } => AgentsSection {
                model: AgentModel::Quad,
                v_max_mps: Some(gains.v_max),
                quad: Some(QuadSection {
                    mass_kg: params.mass,
                    inertia_kg_m2: diag(&params.inertia, "inertia")?,
                    gravity_mps2: params.gravity,
                    kp_v_per_s: arr(&gains.kp_v),
                    ki_v_per_s2: arr(&gains.ki_v),
                    kd_v: arr(&gains.kd_v),
                    kp_att_nm_per_rad: diag(&gains.kp_att, "attitude gain")?,
                    kd_att_nms_per_rad: diag(&gains.kd_att, "attitude damping")?,
                    yaw_rad: gains.yaw_desired,
                    max_tilt_rad: gains.max_tilt,
                    thrust_floor_hover: gains.thrust_floor,
                    thrust_ceiling_hover: gains.thrust_ceiling,
                }),
            },
        };
        let size = s
            .controllers
            .size
            .as_ref()
            .map(|z| {
                let shaping = match z.fs {
                    Shaping::Tanh => ShapingName::Tanh,
                    Shaping::Saturation => ShapingName::Saturation,
                    Shaping::Custom(_) => {
                        return Err(CliError::Schema("custom shaping functions cannot be written to a file".into()))
                    }
                };
                Ok(SizeSection { rho_m: z.rho, alpha_s0_rad: z.alpha_s0, shaping, tau_s: z.tau })
            })
            .transpose()?;
        Ok(Self {
            meta,
            polygon,
            polyhedron,
            agents,
            initial: InitialSection { positions_m: s.initial.iter().map(arr).collect() },
            size,
            center: s.controllers.center.map(|c| CenterSection { target_m: arr(&c.x_c), k_c_per_s: c.k_c, tau_s: c.tau }),
            collision: s.controllers.collision.map(|c| CollisionSection {
                variant: c.variant,
                r1_m: c.r1,
                r2_m: c.r2,
                k_coll_mps: c.k_coll,
                rho_m: c.rho,
            }),
            disturbance: s.disturbance.map(|d| DisturbanceSection {
                amplitude_rad: d.amplitude,
                window_s: d.window,
                d_bar_mps: d.d_bar,
            }),
            sim: SimSection {
                dt_s: s.sim.dt,
                t_end_s: s.sim.t_end,
                integrator: s.sim.integrator,
                record_every: s.sim.record_every,
                stop_residual: s.sim.stop_residual,
                seed: s.seed,
            },
            montecarlo: mc.map(|m| MonteCarloSection {
                samples: m.samples,
                radius_m: m.radius,
                master_seed: m.master_seed,
                center_m: m.center.as_ref().map(arr),
                min_separation_m: m.min_separation,
                criteria: (m.criteria != ConvergenceCriteria::default()).then_some(CriteriaSection {
                    formation_error: m.criteria.formation_error,
                    side_error: m.criteria.side_error,
                    center_error_m: m.criteria.center_error,
                }),
            }),
        })
    }
}
