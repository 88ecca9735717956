//! Exact continuous-time simulation of the Schelling particle system.
//!
//! Three event channels run in parallel:
//!
//! * Schelling flips, rate 1 at every potentially stable site;
//! * spontaneous flips, rate `beta` at every site;
//! * exchanges of the values at nearest neighbors `i, j`, rate `alpha N^2` per
//!   ordered pair, i.e. `2 alpha N^2` per edge and `2 alpha N^2 d N^d` in total.
//!
//! The simulator is a Gillespie loop over the channel totals. Potentially stable
//! sites live in an indexed set with O(1) insertion, removal and uniform sampling;
//! after each event only the sites whose neighborhood contains a changed site
//! are reclassified.
//!
//! Exchanges of equal values leave the configuration unchanged but still consume
//! time. With [`SimulationOptions::effective_exchanges`] only discordant edges are
//! sampled, at rate `2 alpha N^2` each; the law of the configuration process is
//! the same, only the event counters differ.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discrete_pde::DiscreteField;
use crate::lattice::{Configuration, LatticeError, NeighborTable, Threshold, TorusGeometry};
use crate::rng::{stream_rng, SimRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid parameter {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("total event rate is zero")]
    Absorbing,
    #[error("rate cache disagrees with a full recomputation at site {0}")]
    CacheMismatch(usize),
    #[error("observation times must be strictly increasing within [0, {t_end}]")]
    ObservationTimes { t_end: f64 },
    #[error("block side {block} does not divide the torus side {side}")]
    BlockSize { block: usize, side: usize },
    #[error("initial field value {value} at site {site} is outside [0, 1]")]
    FieldOutOfRange { site: usize, value: f64 },
    #[error("configuration and neighbor table live on different tori")]
    GeometryMismatch,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Rates of the particle system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchellingParams {
    pub threshold: f64,
    pub beta: f64,
    pub alpha: f64,
}

impl SchellingParams {
    pub fn new(threshold: f64, beta: f64, alpha: f64) -> Result<Self, DynamicsError> {
        let p = Self {
            threshold,
            beta,
            alpha,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(DynamicsError::InvalidParameter {
                field: "threshold",
                reason: format!("must lie in [0, 1], got {}", self.threshold),
            });
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(DynamicsError::InvalidParameter {
                field: "beta",
                reason: format!("must be finite and >= 0, got {}", self.beta),
            });
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(DynamicsError::InvalidParameter {
                field: "alpha",
                reason: format!("must be finite and > 0, got {}", self.alpha),
            });
        }
        Ok(())
    }

    /// Exchange rate per ordered adjacent pair, `alpha N^2`.
    pub fn pair_rate(&self, side: usize) -> f64 {
        self.alpha * (side * side) as f64
    }
}

/// Total rate of each channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRates {
    pub schelling: f64,
    pub spontaneous: f64,
    pub exchange: f64,
}

impl ChannelRates {
    pub fn total(&self) -> f64 {
        self.schelling + self.spontaneous + self.exchange
    }
}

/// Channel totals recomputed from scratch.
pub fn total_rates(
    config: &Configuration,
    table: &NeighborTable,
    params: &SchellingParams,
) -> ChannelRates {
    let geometry = config.geometry();
    let sites = geometry.site_count();
    let kappa = Threshold::new(params.threshold)
        .map(|t| t.kappa(table.k()))
        .unwrap_or(-1);
    let schelling = (0..sites)
        .filter(|&i| (config.same_count(table, i) as i64) <= kappa)
        .count();
    ChannelRates {
        schelling: schelling as f64,
        spontaneous: params.beta * sites as f64,
        exchange: params.pair_rate(geometry.side()) * (2 * geometry.dim() * sites) as f64,
    }
}

/// Set of indices with O(1) insert, remove, membership and uniform sampling.
#[derive(Debug, Clone)]
struct IndexedSet {
    items: Vec<u32>,
    slot: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl IndexedSet {
    fn new(capacity: usize) -> Self {
        Self {
            items: Vec::new(),
            slot: vec![ABSENT; capacity],
        }
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    fn contains(&self, x: usize) -> bool {
        self.slot[x] != ABSENT
    }

    fn set(&mut self, x: usize, present: bool) {
        match (self.contains(x), present) {
            (false, true) => {
                self.slot[x] = self.items.len() as u32;
                self.items.push(x as u32);
            }
            (true, false) => {
                let at = self.slot[x] as usize;
                let last = *self.items.last().expect("nonempty");
                self.items.swap_remove(at);
                if last as usize != x {
                    self.slot[last as usize] = at as u32;
                }
                self.slot[x] = ABSENT;
            }
            _ => {}
        }
    }

    fn get(&self, idx: usize) -> usize {
        self.items[idx] as usize
    }
}

/// Incrementally maintained event rates.
#[derive(Debug, Clone)]
pub struct RateCache {
    kappa: i64,
    active: IndexedSet,
    /// Edges `site * d + axis` (forward along `axis`) joining different values.
    discordant: Option<IndexedSet>,
    spontaneous: f64,
    exchange: f64,
}

impl RateCache {
    pub fn new(
        config: &Configuration,
        table: &NeighborTable,
        params: &SchellingParams,
        track_discordant: bool,
    ) -> Self {
        let geometry = config.geometry();
        let sites = geometry.site_count();
        let kappa = Threshold::new(params.threshold)
            .map(|t| t.kappa(table.k()))
            .unwrap_or(-1);
        let mut active = IndexedSet::new(sites);
        for i in 0..sites {
            active.set(i, (config.same_count(table, i) as i64) <= kappa);
        }
        let discordant = track_discordant.then(|| {
            let mut set = IndexedSet::new(sites * geometry.dim());
            for i in 0..sites {
                for axis in 0..geometry.dim() {
                    let j = geometry.step(i, axis, true);
                    set.set(i * geometry.dim() + axis, config.get(i) != config.get(j));
                }
            }
            set
        });
        Self {
            kappa,
            active,
            discordant,
            spontaneous: params.beta * sites as f64,
            exchange: params.pair_rate(geometry.side()) * (2 * geometry.dim() * sites) as f64,
        }
    }

    /// Whether `site` is currently potentially stable.
    pub fn is_active(&self, site: usize) -> bool {
        self.active.contains(site)
    }

    pub fn rates(&self) -> ChannelRates {
        ChannelRates {
            schelling: self.active.len() as f64,
            spontaneous: self.spontaneous,
            exchange: self.exchange,
        }
    }

    fn refresh(&mut self, config: &Configuration, table: &NeighborTable, site: usize) {
        let flag = (config.same_count(table, site) as i64) <= self.kappa;
        self.active.set(site, flag);
    }

    fn refresh_edges(&mut self, config: &Configuration, site: usize) {
        if let Some(set) = self.discordant.as_mut() {
            let geometry = config.geometry();
            let d = geometry.dim();
            for axis in 0..d {
                let fwd = geometry.step(site, axis, true);
                set.set(site * d + axis, config.get(site) != config.get(fwd));
                let back = geometry.step(site, axis, false);
                set.set(back * d + axis, config.get(site) != config.get(back));
            }
        }
    }

    /// Compare against a from-scratch rebuild.
    pub fn verify(
        &self,
        config: &Configuration,
        table: &NeighborTable,
        params: &SchellingParams,
    ) -> Result<(), DynamicsError> {
        let fresh = RateCache::new(config, table, params, self.discordant.is_some());
        for i in 0..config.geometry().site_count() {
            if fresh.is_active(i) != self.is_active(i) {
                return Err(DynamicsError::CacheMismatch(i));
            }
        }
        if let (Some(a), Some(b)) = (&self.discordant, &fresh.discordant) {
            for e in 0..a.slot.len() {
                if a.contains(e) != b.contains(e) {
                    return Err(DynamicsError::CacheMismatch(e / config.geometry().dim()));
                }
            }
        }
        let stored = self.rates();
        let recomputed = total_rates(config, table, params);
        if stored != recomputed {
            return Err(DynamicsError::CacheMismatch(usize::MAX));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Schelling,
    Spontaneous,
    Exchange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    Schelling { site: usize },
    Spontaneous { site: usize },
    /// `changed` is false when the two sites held equal values.
    Exchange { from: usize, to: usize, changed: bool },
}

impl Event {
    pub fn channel(&self) -> Channel {
        match self {
            Event::Schelling { .. } => Channel::Schelling,
            Event::Spontaneous { .. } => Channel::Spontaneous,
            Event::Exchange { .. } => Channel::Exchange,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounters {
    pub schelling: u64,
    pub spontaneous: u64,
    pub exchange: u64,
    /// Exchanges between equal values (a subset of `exchange`).
    pub exchange_noop: u64,
}

impl EventCounters {
    fn record(&mut self, event: &Event) {
        match event {
            Event::Schelling { .. } => self.schelling += 1,
            Event::Spontaneous { .. } => self.spontaneous += 1,
            Event::Exchange { changed, .. } => {
                self.exchange += 1;
                if !changed {
                    self.exchange_noop += 1;
                }
            }
        }
    }
}

/// A running instance of the particle system.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    params: SchellingParams,
    table: &'a NeighborTable,
    config: Configuration,
    cache: RateCache,
    effective_exchanges: bool,
    time: f64,
    counters: EventCounters,
}

impl<'a> Simulator<'a> {
    pub fn new(
        params: SchellingParams,
        table: &'a NeighborTable,
        init: Configuration,
        effective_exchanges: bool,
    ) -> Result<Self, DynamicsError> {
        params.validate()?;
        if init.geometry() != table.geometry() {
            return Err(DynamicsError::GeometryMismatch);
        }
        let cache = RateCache::new(&init, table, &params, effective_exchanges);
        Ok(Self {
            params,
            table,
            config: init,
            cache,
            effective_exchanges,
            time: 0.0,
            counters: EventCounters::default(),
        })
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn cache(&self) -> &RateCache {
        &self.cache
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn counters(&self) -> EventCounters {
        self.counters
    }

    /// Channel totals as used for sampling (the exchange total is reduced to the
    /// discordant edges in effective-exchange mode).
    pub fn sampling_rates(&self) -> ChannelRates {
        let mut rates = self.cache.rates();
        if let Some(set) = &self.cache.discordant {
            rates.exchange = 2.0 * self.params.pair_rate(self.geometry().side()) * set.len() as f64;
        }
        rates
    }

    fn geometry(&self) -> &TorusGeometry {
        self.config.geometry()
    }

    /// Draw the next waiting time and event without applying it.
    pub fn propose(&self, rng: &mut SimRng) -> Result<(Event, f64), DynamicsError> {
        let rates = self.sampling_rates();
        let total = rates.total();
        if total <= 0.0 {
            return Err(DynamicsError::Absorbing);
        }
        let e: f64 = Exp1.sample(rng);
        let wait = e / total;
        let pick = rng.random::<f64>() * total;
        let geometry = self.geometry();
        let sites = geometry.site_count();
        let event = if pick < rates.schelling {
            let idx = rng.random_range(0..self.cache.active.len());
            Event::Schelling {
                site: self.cache.active.get(idx),
            }
        } else if pick < rates.schelling + rates.spontaneous || rates.exchange <= 0.0 {
            Event::Spontaneous {
                site: rng.random_range(0..sites),
            }
        } else if let Some(set) = &self.cache.discordant {
            let edge = set.get(rng.random_range(0..set.len()));
            let d = geometry.dim();
            let (a, b) = (edge / d, geometry.step(edge / d, edge % d, true));
            let (from, to) = if rng.random::<bool>() { (a, b) } else { (b, a) };
            Event::Exchange {
                from,
                to,
                changed: true,
            }
        } else {
            let d = geometry.dim();
            let pair = rng.random_range(0..2 * d * sites);
            let from = pair / (2 * d);
            let dir = pair % (2 * d);
            let to = geometry.step(from, dir / 2, dir.is_multiple_of(2));
            Event::Exchange {
                from,
                to,
                changed: self.config.get(from) != self.config.get(to),
            }
        };
        Ok((event, wait))
    }

    /// Apply an event and update the cache locally.
    pub fn apply(&mut self, event: &Event) {
        match *event {
            Event::Schelling { site } | Event::Spontaneous { site } => {
                self.config.flip_in_place(site);
                self.refresh_around(site);
            }
            Event::Exchange { from, to, changed } => {
                if changed {
                    self.config.swap_in_place(from, to);
                    self.refresh_around(from);
                    self.refresh_around(to);
                }
            }
        }
        self.counters.record(event);
    }

    fn refresh_around(&mut self, site: usize) {
        self.cache.refresh(&self.config, self.table, site);
        for &i in self.table.dependents(site) {
            self.cache.refresh(&self.config, self.table, i as usize);
        }
        self.cache.refresh_edges(&self.config, site);
    }

    /// Draw and apply one event, advancing time.
    pub fn step(&mut self, rng: &mut SimRng) -> Result<(Event, f64), DynamicsError> {
        let (event, wait) = self.propose(rng)?;
        self.time += wait;
        self.apply(&event);
        Ok((event, wait))
    }

    pub fn verify_cache(&self) -> Result<(), DynamicsError> {
        self.cache.verify(&self.config, self.table, &self.params)
    }

    pub fn into_config(self) -> Configuration {
        self.config
    }

    pub fn effective_exchanges(&self) -> bool {
        self.effective_exchanges
    }
}

/// What to store at each observation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotMode {
    #[default]
    Full,
    /// Means over cubes of side `block`, row-major over the block grid.
    Blocks(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot {
    Full(Configuration),
    Blocks { block: usize, means: Vec<f64> },
}

impl Snapshot {
    /// Fraction of occupied sites.
    pub fn density(&self) -> f64 {
        match self {
            Snapshot::Full(c) => c.ones_count() as f64 / c.geometry().site_count() as f64,
            Snapshot::Blocks { means, .. } => means.iter().sum::<f64>() / means.len() as f64,
        }
    }

    pub fn config(&self) -> Option<&Configuration> {
        match self {
            Snapshot::Full(c) => Some(c),
            Snapshot::Blocks { .. } => None,
        }
    }
}

/// Means of `config` over cubes of side `block`.
pub fn block_means(config: &Configuration, block: usize) -> Result<Vec<f64>, DynamicsError> {
    let geometry = config.geometry();
    let side = geometry.side();
    if block == 0 || !side.is_multiple_of(block) {
        return Err(DynamicsError::BlockSize { block, side });
    }
    let per_axis = side / block;
    let d = geometry.dim();
    let mut sums = vec![0.0; per_axis.pow(d as u32)];
    for site in 0..geometry.site_count() {
        let mut b = 0;
        for axis in 0..d {
            b = b * per_axis + geometry.coord(site, axis) / block;
        }
        sums[b] += config.occupancy()[site] as f64;
    }
    let volume = block.pow(d as u32) as f64;
    Ok(sums.into_iter().map(|s| s / volume).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimulationOptions {
    pub snapshots: SnapshotMode,
    pub effective_exchanges: bool,
    /// Rebuild the rate cache from scratch after every event and fail on mismatch.
    pub verify_cache: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Observation times; the first is always `0`.
    pub times: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub counters: EventCounters,
    pub seed: u64,
    pub stream: u64,
}

/// Run the particle system from `init` up to `t_end`, recording the state at
/// each observation time (the state after the last event at or before it).
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    params: &SchellingParams,
    table: &NeighborTable,
    init: Configuration,
    t_end: f64,
    obs_times: &[f64],
    seed: u64,
    stream: u64,
    options: SimulationOptions,
) -> Result<Trajectory, DynamicsError> {
    let mut rng = stream_rng(seed, stream);
    simulate_with_rng(params, table, init, t_end, obs_times, &mut rng, options).map(|mut tr| {
        tr.seed = seed;
        tr.stream = stream;
        tr
    })
}

/// [`simulate`] drawing from a caller-owned generator; the returned trajectory
/// records seed and stream as zero.
pub fn simulate_with_rng(
    params: &SchellingParams,
    table: &NeighborTable,
    init: Configuration,
    t_end: f64,
    obs_times: &[f64],
    rng: &mut SimRng,
    options: SimulationOptions,
) -> Result<Trajectory, DynamicsError> {
    if !(t_end >= 0.0 && t_end.is_finite())
        || obs_times.windows(2).any(|w| w[0] >= w[1])
        || obs_times.iter().any(|&t| !(0.0..=t_end).contains(&t))
    {
        return Err(DynamicsError::ObservationTimes { t_end });
    }
    let mut times = vec![0.0];
    times.extend(obs_times.iter().copied().filter(|&t| t > 0.0));
    let snap = |c: &Configuration| -> Result<Snapshot, DynamicsError> {
        Ok(match options.snapshots {
            SnapshotMode::Full => Snapshot::Full(c.clone()),
            SnapshotMode::Blocks(b) => Snapshot::Blocks {
                block: b,
                means: block_means(c, b)?,
            },
        })
    };
    let mut sim = Simulator::new(*params, table, init, options.effective_exchanges)?;
    let mut snapshots = Vec::with_capacity(times.len());
    let mut next = 0;
    while next < times.len() && times[next] <= sim.time() {
        snapshots.push(snap(sim.config())?);
        next += 1;
    }
    while next < times.len() {
        let (event, wait) = match sim.propose(rng) {
            Ok(x) => x,
            Err(DynamicsError::Absorbing) => (
                Event::Spontaneous { site: 0 },
                f64::INFINITY,
            ),
            Err(e) => return Err(e),
        };
        let at = sim.time() + wait;
        while next < times.len() && times[next] < at {
            snapshots.push(snap(sim.config())?);
            next += 1;
        }
        if at > t_end {
            break;
        }
        sim.time = at;
        sim.apply(&event);
        if options.verify_cache {
            sim.verify_cache()?;
        }
    }
    Ok(Trajectory {
        times,
        snapshots,
        counters: sim.counters(),
        seed: 0,
        stream: 0,
    })
}

/// Product-Bernoulli configuration with site `i` occupied with probability `u0(i)`.
pub fn sample_initial(u0: &DiscreteField, rng: &mut SimRng) -> Result<Configuration, DynamicsError> {
    let mut bits = Vec::with_capacity(u0.values().len());
    for (site, &p) in u0.values().iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(DynamicsError::FieldOutOfRange { site, value: p });
        }
        bits.push(rng.random::<f64>() < p);
    }
    Ok(Configuration::from_bits(*u0.geometry(), bits)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Neighborhood;

    fn ring(n: usize) -> NeighborTable {
        let g = TorusGeometry::new(1, n).unwrap();
        let nb = Neighborhood::from_offsets(1, vec![vec![-1], vec![1]]).unwrap();
        NeighborTable::new(&g, &nb).unwrap()
    }

    #[test]
    fn total_rates_on_alternating_ring() {
        let table = ring(4);
        let c: Configuration = "1 4\n0101\n".parse().unwrap();
        let p = SchellingParams::new(0.5, 0.1, 0.5).unwrap();
        let r = total_rates(&c, &table, &p);
        assert_eq!(r.schelling, 4.0);
        assert!((r.spontaneous - 0.4).abs() < 1e-15);
        assert_eq!(r.exchange, 64.0);
        let full = Configuration::filled(*table.geometry(), true);
        assert_eq!(total_rates(&full, &table, &p).schelling, 0.0);
    }

    #[test]
    fn params_are_validated() {
        assert!(SchellingParams::new(1.5, 0.1, 0.5).is_err());
        assert!(SchellingParams::new(0.5, -0.1, 0.5).is_err());
        assert!(SchellingParams::new(0.5, 0.1, 0.0).is_err());
    }

    #[test]
    fn cache_stays_coherent_in_2d() {
        let g = TorusGeometry::new(2, 6).unwrap();
        let nb = Neighborhood::build_box(&g, 1, false).unwrap();
        let table = NeighborTable::new(&g, &nb).unwrap();
        let p = SchellingParams::new(0.6, 0.3, 0.01).unwrap();
        for effective in [false, true] {
            let mut rng = stream_rng(3, effective as u64);
            let init = Configuration::from_code(g, 0x0f0f_3c3c_a5a5);
            let mut sim = Simulator::new(p, &table, init, effective).unwrap();
            for _ in 0..2000 {
                let before = sim.config().ones_count();
                let (event, _) = sim.step(&mut rng).unwrap();
                sim.verify_cache().unwrap();
                let after = sim.config().ones_count();
                match event.channel() {
                    Channel::Exchange => assert_eq!(before, after),
                    _ => assert_eq!(before.abs_diff(after), 1),
                }
            }
        }
    }

    #[test]
    fn frozen_start_only_exchanges() {
        let table = ring(8);
        let p = SchellingParams::new(0.5, 0.0, 1.0).unwrap();
        let init = Configuration::filled(*table.geometry(), true);
        let traj = simulate(
            &p,
            &table,
            init.clone(),
            0.1,
            &[0.05, 0.1],
            1,
            0,
            SimulationOptions::default(),
        )
        .unwrap();
        assert_eq!(traj.counters.schelling + traj.counters.spontaneous, 0);
        assert!(traj.counters.exchange > 0);
        assert_eq!(traj.counters.exchange, traj.counters.exchange_noop);
        assert_eq!(traj.snapshots.last().unwrap().config(), Some(&init));
    }

    #[test]
    fn zero_horizon_keeps_initial_snapshot() {
        let table = ring(6);
        let p = SchellingParams::new(0.3, 0.2, 0.5).unwrap();
        let init = Configuration::from_code(*table.geometry(), 0b101100);
        let traj =
            simulate(&p, &table, init.clone(), 0.0, &[], 9, 0, SimulationOptions::default())
                .unwrap();
        assert_eq!(traj.times, vec![0.0]);
        assert_eq!(traj.snapshots, vec![Snapshot::Full(init)]);
        assert!(simulate(
            &p,
            &table,
            Configuration::filled(*table.geometry(), false),
            1.0,
            &[0.5, 0.2],
            9,
            0,
            SimulationOptions::default()
        )
        .is_err());
    }

    #[test]
    fn simulation_is_deterministic() {
        let table = ring(16);
        let p = SchellingParams::new(0.4, 0.2, 0.1).unwrap();
        let init = Configuration::from_code(*table.geometry(), 0xbeef);
        let opts = SimulationOptions {
            snapshots: SnapshotMode::Blocks(4),
            ..Default::default()
        };
        let a = simulate(&p, &table, init.clone(), 1.0, &[0.5, 1.0], 42, 3, opts).unwrap();
        let b = simulate(&p, &table, init, 1.0, &[0.5, 1.0], 42, 3, opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.snapshots.len(), 3);
    }

    #[test]
    fn block_means_average_cubes() {
        let g = TorusGeometry::new(2, 4).unwrap();
        let bits = (0..16).map(|i| (i / 4) < 2 && (i % 4) < 2).collect();
        let c = Configuration::from_bits(g, bits).unwrap();
        assert_eq!(block_means(&c, 2).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert!(block_means(&c, 3).is_err());
    }

    #[test]
    fn sample_initial_extremes() {
        let g = TorusGeometry::new(1, 32).unwrap();
        let mut rng = stream_rng(0, 0);
        let ones = DiscreteField::constant(g, 1.0);
        assert_eq!(sample_initial(&ones, &mut rng).unwrap().ones_count(), 32);
        let bad = DiscreteField::constant(g, 1.5);
        assert!(sample_initial(&bad, &mut rng).is_err());
    }
}
