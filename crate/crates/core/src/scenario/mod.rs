//! Configuration, array geometry and seeded user/target placement.

mod config;

pub use config::{
    dbm_to_linear, linear_to_dbm, load_config, ConfigFile, Precisions, SemanticParams,
    SystemConfig, Tolerances, SPEED_OF_LIGHT,
};

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `2D²/λ`.
pub fn rayleigh_distance(aperture: f64, wavelength: f64) -> f64 {
    2.0 * aperture * aperture / wavelength
}

/// Inner edge of the radiating near field, `0.62·√(D³/λ)`.
pub fn fresnel_distance(aperture: f64, wavelength: f64) -> f64 {
    0.62 * (aperture.powi(3) / wavelength).sqrt()
}

/// Closed rectangle `[x_min, x_max] × [z_min, z_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box2 {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Box2 {
    pub fn point(x: f64, z: f64) -> Self {
        Self { x_min: x, x_max: x, z_min: z, z_max: z }
    }

    pub fn centered(x: f64, z: f64, side: f64) -> Self {
        let h = side / 2.0;
        Self { x_min: x - h, x_max: x + h, z_min: z - h, z_max: z + h }
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        x >= self.x_min && x <= self.x_max && z >= self.z_min && z <= self.z_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.z_max - self.z_min
    }

    /// Area of the intersection with `other`.
    pub fn overlap_area(&self, other: &Box2) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.z_max.min(other.z_max) - self.z_min.max(other.z_min);
        w.max(0.0) * h.max(0.0)
    }
}

/// Transmit fluid-antenna array in the `y = 0` plane.
///
/// Element 0 is the array centroid and never moves.
#[derive(Debug, Clone, PartialEq)]
pub struct TxArray {
    pub positions: Vec<[f64; 2]>,
    pub boxes: Vec<Box2>,
    pub wavelength: f64,
}

impl TxArray {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Flattened coordinates `[x_0..x_{N-1}, z_0..z_{N-1}]`.
    pub fn to_vec(&self) -> DVector<f64> {
        let n = self.len();
        DVector::from_fn(2 * n, |i, _| {
            if i < n {
                self.positions[i][0]
            } else {
                self.positions[i - n][1]
            }
        })
    }

    /// Copy of the array with positions taken from a flattened vector.
    pub fn with_positions(&self, u: &[f64]) -> TxArray {
        let n = self.len();
        assert_eq!(u.len(), 2 * n, "position vector length");
        let mut out = self.clone();
        for i in 0..n {
            out.positions[i] = [u[i], u[n + i]];
        }
        out
    }

    /// Nominal grid points (box centres).
    pub fn nominal(&self) -> TxArray {
        let mut out = self.clone();
        for (p, b) in out.positions.iter_mut().zip(&self.boxes) {
            *p = [(b.x_min + b.x_max) / 2.0, (b.z_min + b.z_max) / 2.0];
        }
        out
    }

    /// Copy with every box collapsed onto the current position.
    pub fn frozen(&self) -> TxArray {
        let mut out = self.clone();
        for (b, p) in out.boxes.iter_mut().zip(&self.positions) {
            *b = Box2::point(p[0], p[1]);
        }
        out
    }

    /// Indices that may move (non-degenerate box, not the centroid).
    pub fn movable(&self) -> Vec<usize> {
        (1..self.len())
            .filter(|&i| self.boxes[i].width() > 0.0 || self.boxes[i].height() > 0.0)
            .collect()
    }

    pub fn within_boxes(&self) -> bool {
        self.positions
            .iter()
            .zip(&self.boxes)
            .all(|(p, b)| b.contains(p[0], p[1]))
    }

    /// Diagonal of the bounding box of all movable regions.
    pub fn aperture(&self) -> f64 {
        let (mut x0, mut x1, mut z0, mut z1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for b in &self.boxes {
            x0 = x0.min(b.x_min);
            x1 = x1.max(b.x_max);
            z0 = z0.min(b.z_min);
            z1 = z1.max(b.z_max);
        }
        if self.boxes.is_empty() {
            return 0.0;
        }
        (x1 - x0).hypot(z1 - z0)
    }

    /// 3-D coordinates of element `i`.
    pub fn point3(&self, i: usize) -> [f64; 3] {
        [self.positions[i][0], 0.0, self.positions[i][1]]
    }
}

/// Fixed receive array on a regular grid anchored at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct RxArray {
    pub n_rx: usize,
    pub n_rz: usize,
    pub d_x: f64,
    pub d_z: f64,
    /// `(x_m, z_m)` with `m = m_x·n_rz + m_z`.
    pub positions: Vec<[f64; 2]>,
    pub wavelength: f64,
}

impl RxArray {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn point3(&self, m: usize) -> [f64; 3] {
        [self.positions[m][0], 0.0, self.positions[m][1]]
    }
}

/// Build the transmit grid (centred, pitch = movable range) and receive grid.
pub fn build_arrays(config: &SystemConfig) -> (TxArray, RxArray) {
    let side = config.movable_range();
    let pitch = config.tx_pitch.unwrap_or(if side > 0.0 {
        side
    } else {
        config.wavelength / 2.0
    });
    let (cx, cz) = ((config.n_tx - 1) / 2, (config.n_tz - 1) / 2);
    let mut order = vec![(cx, cz)];
    for ix in 0..config.n_tx {
        for iz in 0..config.n_tz {
            if (ix, iz) != (cx, cz) {
                order.push((ix, iz));
            }
        }
    }
    let mut positions = Vec::with_capacity(order.len());
    let mut boxes = Vec::with_capacity(order.len());
    for (k, &(ix, iz)) in order.iter().enumerate() {
        let x = (ix as f64 - cx as f64) * pitch;
        let z = (iz as f64 - cz as f64) * pitch;
        positions.push([x, z]);
        boxes.push(if k == 0 { Box2::point(x, z) } else { Box2::centered(x, z, side) });
    }
    let tx = TxArray { positions, boxes, wavelength: config.wavelength };

    let d = config.rx_spacing;
    let mut rx_pos = Vec::with_capacity(config.n_r());
    for mx in 0..config.n_rx {
        for mz in 0..config.n_rz {
            rx_pos.push([mx as f64 * d, mz as f64 * d]);
        }
    }
    let rx = RxArray {
        n_rx: config.n_rx,
        n_rz: config.n_rz,
        d_x: d,
        d_z: d,
        positions: rx_pos,
        wavelength: config.wavelength,
    };
    (tx, rx)
}

/// Position of an entity relative to the array origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entity {
    /// Azimuth θ in [0, π].
    pub theta: f64,
    /// Broadside angle φ in [0, π].
    pub phi: f64,
    /// Range in m.
    pub range: f64,
}

impl Entity {
    pub fn position(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [
            self.range * ct * sp,
            self.range * st * sp,
            self.range * cp,
        ]
    }

    pub fn from_position(p: [f64; 3]) -> Entity {
        let range = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let phi = (p[2] / range).clamp(-1.0, 1.0).acos();
        let theta = p[1].atan2(p[0]);
        Entity { theta, phi, range }
    }
}

/// Extended target: a cluster of point scatterers.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub center: Entity,
    pub cluster_radius: f64,
    pub scatterers: Vec<Entity>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub users: Vec<Entity>,
    pub targets: Vec<Target>,
    /// Range window used for generation `(lower, upper)`.
    pub range_bounds: (f64, f64),
}

/// Near-field range window `(max(Fresnel, 5λ), Rayleigh)` for an array.
pub fn near_field_window(tx: &TxArray) -> (f64, f64) {
    let lam = tx.wavelength;
    let d = tx.aperture();
    let lo = fresnel_distance(d, lam).max(5.0 * lam);
    // a degenerate aperture has no near field; keep a usable window anyway
    let hi = rayleigh_distance(d, lam).max(4.0 * lo);
    (lo, hi)
}

const ANGLE_LO: f64 = 0.15 * PI;
const ANGLE_HI: f64 = 0.85 * PI;

/// Seeded user and scatterer locations inside the near field of the Tx array.
pub fn generate_placements(config: &SystemConfig, seed: u64) -> Placement {
    let (tx, _) = build_arrays(config);
    let (lo, hi) = near_field_window(&tx);
    let (d_lo, d_hi) = (1.2 * lo, 0.8 * hi);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entity = |rng: &mut ChaCha8Rng| Entity {
        theta: rng.random_range(ANGLE_LO..ANGLE_HI),
        phi: rng.random_range(ANGLE_LO..ANGLE_HI),
        range: rng.random_range(d_lo..d_hi),
    };
    let users = (0..config.users).map(|_| entity(&mut rng)).collect();
    let mut targets = Vec::with_capacity(config.targets);
    for _ in 0..config.targets {
        let center = entity(&mut rng);
        let radius = config.cluster_radius.min(0.1 * center.range);
        let c = center.position();
        let mut scatterers = Vec::with_capacity(config.scatterers);
        while scatterers.len() < config.scatterers {
            let off = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let r2: f64 = off.iter().map(|o: &f64| o * o).sum();
            if r2 > 1.0 {
                continue;
            }
            let p = [c[0] + radius * off[0], c[1] + radius * off[1], c[2] + radius * off[2]];
            scatterers.push(Entity::from_position(p));
        }
        targets.push(Target { center, cluster_radius: radius, scatterers });
    }
    Placement { users, targets, range_bounds: (lo, hi) }
}

/// Configuration together with the generated geometry.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: SystemConfig,
    pub tx: TxArray,
    pub rx: RxArray,
    pub placement: Placement,
    pub seed: u64,
}

impl Scenario {
    pub fn new(config: SystemConfig, seed: u64) -> Scenario {
        let (tx, rx) = build_arrays(&config);
        let placement = generate_placements(&config, seed);
        Scenario { config, tx, rx, placement, seed }
    }

    /// Same geometry with the transmit array replaced.
    pub fn with_tx(&self, tx: TxArray) -> Scenario {
        Scenario { tx, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rayleigh_examples() {
        assert!((rayleigh_distance(0.5, 0.006) - 83.3333).abs() < 1e-3);
        assert_eq!(rayleigh_distance(0.0, 0.006), 0.0);
        assert_eq!(rayleigh_distance(1.0, 2.0), 1.0);
    }

    #[test]
    fn single_antenna_is_fixed_at_origin() {
        let cfg = SystemConfig {
            n_tx: 1,
            n_tz: 1,
            users: 1,
            targets: 0,
            ..SystemConfig::default()
        };
        let (tx, _) = build_arrays(&cfg);
        assert_eq!(tx.positions, vec![[0.0, 0.0]]);
        assert!(tx.movable().is_empty());
    }

    #[test]
    fn default_boxes_are_disjoint_5cm_squares() {
        let (tx, _) = build_arrays(&SystemConfig::default());
        assert_eq!(tx.len(), 9);
        for (i, b) in tx.boxes.iter().enumerate().skip(1) {
            assert!((b.width() - 0.05).abs() < 1e-12);
            assert!((b.height() - 0.05).abs() < 1e-12);
            assert!(b.contains(tx.positions[i][0], tx.positions[i][1]));
        }
        for i in 0..9 {
            for j in (i + 1)..9 {
                assert_eq!(tx.boxes[i].overlap_area(&tx.boxes[j]), 0.0, "{i} {j}");
            }
        }
    }

    #[test]
    fn rx_grid_half_wavelength() {
        let (_, rx) = build_arrays(&SystemConfig::default());
        assert_eq!(rx.len(), 25);
        let lam = SPEED_OF_LIGHT / 50e9;
        assert!((rx.positions[1][1] - lam / 2.0).abs() < 1e-15);
        assert!((rx.positions[5][0] - lam / 2.0).abs() < 1e-15);
        assert!((lam / 2.0 - 0.003).abs() < 1e-5);
    }

    #[test]
    fn placements_are_deterministic_and_seed_dependent() {
        let cfg = SystemConfig::default();
        assert_eq!(generate_placements(&cfg, 7), generate_placements(&cfg, 7));
        assert_ne!(generate_placements(&cfg, 7), generate_placements(&cfg, 8));
    }

    #[test]
    fn placements_stay_in_near_field() {
        let cfg = SystemConfig::default();
        let lam = cfg.wavelength;
        for seed in 0..1000 {
            let p = generate_placements(&cfg, seed);
            let ranges = p
                .users
                .iter()
                .chain(p.targets.iter().flat_map(|t| t.scatterers.iter()))
                .map(|e| e.range);
            for d in ranges {
                assert!(d > 5.0 * lam && d < 83.33, "seed {seed}: {d}");
                assert!(d > p.range_bounds.0 && d < p.range_bounds.1);
            }
            for t in &p.targets {
                let c = t.center.position();
                for s in &t.scatterers {
                    let q = s.position();
                    let dist = ((q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2) + (q[2] - c[2]).powi(2)).sqrt();
                    assert!(dist <= t.cluster_radius + 1e-12);
                    assert!(s.theta >= 0.0 && s.theta <= PI && s.phi >= 0.0 && s.phi <= PI);
                }
            }
        }
    }
}
