//! Pooling instance data model, validation, JSON file format and the random
//! instance generator.

use std::fmt;
use std::fs;
use std::path::Path;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::InstanceError;

/// Node layer of the tripartite network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Input,
    Pool,
    Output,
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layer::Input => "input",
            Layer::Pool => "pool",
            Layer::Output => "output",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub layer: Layer,
    pub index: usize,
}

impl NodeId {
    pub fn input(index: usize) -> Self {
        NodeId { layer: Layer::Input, index }
    }

    pub fn pool(index: usize) -> Self {
        NodeId { layer: Layer::Pool, index }
    }

    pub fn output(index: usize) -> Self {
        NodeId { layer: Layer::Output, index }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.layer, self.index)
    }
}

/// The three admissible arc classes. The derived order is the canonical
/// arc order used for variable indexing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ArcKind {
    InputPool,
    InputOutput,
    PoolOutput,
}

/// A directed arc with its unit weight and optional flow capacity
/// (`None` means unbounded).
#[derive(Clone, Debug, PartialEq)]
pub struct Arc {
    pub tail: NodeId,
    pub head: NodeId,
    pub weight: f64,
    pub capacity: Option<f64>,
}

impl Arc {
    pub fn kind(&self) -> Option<ArcKind> {
        match (self.tail.layer, self.head.layer) {
            (Layer::Input, Layer::Pool) => Some(ArcKind::InputPool),
            (Layer::Input, Layer::Output) => Some(ArcKind::InputOutput),
            (Layer::Pool, Layer::Output) => Some(ArcKind::PoolOutput),
            _ => None,
        }
    }

    fn sort_key(&self) -> (Option<ArcKind>, usize, usize) {
        (self.kind(), self.tail.index, self.head.index)
    }
}

/// A standard pooling instance.
///
/// Capacities use `None` as the unbounded marker. Quality tables are indexed
/// `[node][attribute]`. Arcs are kept in canonical order (arc kind, tail
/// index, head index), which fixes the indexing of every flow vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolingInstance {
    pub inputs: usize,
    pub pools: usize,
    pub outputs: usize,
    pub attributes: usize,
    pub arcs: Vec<Arc>,
    pub input_capacity: Vec<Option<f64>>,
    pub pool_capacity: Vec<Option<f64>>,
    pub output_capacity: Vec<Option<f64>>,
    pub input_quality: Vec<Vec<f64>>,
    pub quality_lb: Vec<Vec<f64>>,
    pub quality_ub: Vec<Vec<f64>>,
}

impl PoolingInstance {
    /// An instance without arcs: unbounded capacities, zero qualities and
    /// zero quality bounds.
    pub fn empty(inputs: usize, pools: usize, outputs: usize, attributes: usize) -> Self {
        PoolingInstance {
            inputs,
            pools,
            outputs,
            attributes,
            arcs: Vec::new(),
            input_capacity: vec![None; inputs],
            pool_capacity: vec![None; pools],
            output_capacity: vec![None; outputs],
            input_quality: vec![vec![0.0; attributes]; inputs],
            quality_lb: vec![vec![0.0; attributes]; outputs],
            quality_ub: vec![vec![0.0; attributes]; outputs],
        }
    }

    /// Inserts an arc at its canonical position and returns that position.
    pub fn add_arc(
        &mut self,
        tail: NodeId,
        head: NodeId,
        weight: f64,
        capacity: Option<f64>,
    ) -> usize {
        let arc = Arc { tail, head, weight, capacity };
        let key = arc.sort_key();
        let pos = self.arcs.partition_point(|a| a.sort_key() <= key);
        self.arcs.insert(pos, arc);
        pos
    }

    /// Sorts arcs into canonical order.
    pub fn canonicalize(&mut self) {
        self.arcs.sort_by_key(Arc::sort_key);
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn node_capacity(&self, node: NodeId) -> Option<f64> {
        match node.layer {
            Layer::Input => self.input_capacity[node.index],
            Layer::Pool => self.pool_capacity[node.index],
            Layer::Output => self.output_capacity[node.index],
        }
    }

    pub fn arc_index(&self, tail: NodeId, head: NodeId) -> Option<usize> {
        self.arcs.iter().position(|a| a.tail == tail && a.head == head)
    }

    /// "I-L-J-K" dimension string.
    pub fn dims(&self) -> String {
        format!("{}-{}-{}-{}", self.inputs, self.pools, self.outputs, self.attributes)
    }

    /// Incidence lists. Assumes a structurally valid instance.
    pub fn topology(&self) -> Topology {
        let mut topo = Topology {
            pool_in: vec![Vec::new(); self.pools],
            pool_out: vec![Vec::new(); self.pools],
            output_in: vec![Vec::new(); self.outputs],
            input_out: vec![Vec::new(); self.inputs],
        };
        for (a, arc) in self.arcs.iter().enumerate() {
            match arc.kind() {
                Some(ArcKind::InputPool) => {
                    topo.pool_in[arc.head.index].push((a, arc.tail.index));
                    topo.input_out[arc.tail.index].push(a);
                }
                Some(ArcKind::InputOutput) => {
                    topo.output_in[arc.head.index].push((a, arc.tail));
                    topo.input_out[arc.tail.index].push(a);
                }
                Some(ArcKind::PoolOutput) => {
                    topo.pool_out[arc.tail.index].push((a, arc.head.index));
                    topo.output_in[arc.head.index].push((a, arc.tail));
                }
                None => {}
            }
        }
        topo
    }

    /// Lists every violated invariant. An empty report means the instance is valid.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut push = |field: String, message: String| {
            report.violations.push(Violation { field, message })
        };

        let counts = [
            ("input_capacity", self.input_capacity.len(), self.inputs),
            ("pool_capacity", self.pool_capacity.len(), self.pools),
            ("output_capacity", self.output_capacity.len(), self.outputs),
            ("input_quality", self.input_quality.len(), self.inputs),
            ("quality_lb", self.quality_lb.len(), self.outputs),
            ("quality_ub", self.quality_ub.len(), self.outputs),
        ];
        let mut shapes_ok = true;
        for (field, found, expected) in counts {
            if found != expected {
                shapes_ok = false;
                push(field.into(), format!("expected {expected} entries, found {found}"));
            }
        }
        for (field, table) in [
            ("input_quality", &self.input_quality),
            ("quality_lb", &self.quality_lb),
            ("quality_ub", &self.quality_ub),
        ] {
            for (n, row) in table.iter().enumerate() {
                if row.len() != self.attributes {
                    shapes_ok = false;
                    push(
                        format!("{field}[{n}]"),
                        format!("expected {} attributes, found {}", self.attributes, row.len()),
                    );
                }
                for (k, v) in row.iter().enumerate() {
                    if !v.is_finite() {
                        push(format!("{field}[{n}][{k}]"), format!("non-finite value {v}"));
                    }
                }
            }
        }

        for (layer, caps) in [
            (Layer::Input, &self.input_capacity),
            (Layer::Pool, &self.pool_capacity),
            (Layer::Output, &self.output_capacity),
        ] {
            for (n, cap) in caps.iter().enumerate() {
                if let Some(c) = cap {
                    if !(c.is_finite() && *c >= 0.0) {
                        push(
                            format!("node_capacities[{layer}{n}].capacity"),
                            format!("capacity must be a nonnegative number, found {c}"),
                        );
                    }
                }
            }
        }

        if shapes_ok {
            for j in 0..self.outputs {
                for k in 0..self.attributes {
                    let (lb, ub) = (self.quality_lb[j][k], self.quality_ub[j][k]);
                    if lb > ub {
                        push(
                            format!("quality_lb[{j}][{k}]"),
                            format!("lower quality bound {lb} exceeds upper bound {ub} at output {j}, attribute {k}"),
                        );
                    }
                }
            }
        }

        let layer_size = |node: NodeId| match node.layer {
            Layer::Input => self.inputs,
            Layer::Pool => self.pools,
            Layer::Output => self.outputs,
        };
        for (a, arc) in self.arcs.iter().enumerate() {
            let field = format!("arcs[{a}]");
            if arc.kind().is_none() {
                push(
                    field.clone(),
                    format!("arc {} -> {} is not input->pool, input->output or pool->output", arc.tail, arc.head),
                );
            }
            for end in [arc.tail, arc.head] {
                if end.index >= layer_size(end) {
                    push(field.clone(), format!("node {end} does not exist"));
                }
            }
            if !arc.weight.is_finite() {
                push(format!("{field}.weight"), format!("non-finite weight {}", arc.weight));
            }
            if let Some(c) = arc.capacity {
                if !(c.is_finite() && c >= 0.0) {
                    push(
                        format!("{field}.capacity"),
                        format!("capacity must be a nonnegative number, found {c}"),
                    );
                }
            }
            if self.arcs[..a].iter().any(|b| b.tail == arc.tail && b.head == arc.head) {
                push(field, format!("duplicate arc {} -> {}", arc.tail, arc.head));
            }
        }
        report
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), InstanceError> {
        let text = self.to_json()?;
        fs::write(path.as_ref(), text).map_err(|source| InstanceError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        let text = fs::read_to_string(path.as_ref()).map_err(|source| InstanceError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String, InstanceError> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(InstanceError::Invalid(report));
        }
        let file = InstanceFile::from(self);
        let mut text = serde_json::to_string_pretty(&file).map_err(InstanceError::Parse)?;
        text.push('\n');
        Ok(text)
    }

    /// Parses and validates an instance document. Arcs are reordered
    /// canonically.
    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text).map_err(InstanceError::Parse)?;
        let instance = file.into_instance()?;
        let report = instance.validate();
        if !report.is_valid() {
            return Err(InstanceError::Invalid(report));
        }
        Ok(instance)
    }
}

/// Incidence lists of a [`PoolingInstance`], all holding arc positions.
#[derive(Clone, Debug)]
pub struct Topology {
    /// Per pool: (arc, input index) of incoming arcs.
    pub pool_in: Vec<Vec<(usize, usize)>>,
    /// Per pool: (arc, output index) of outgoing arcs.
    pub pool_out: Vec<Vec<(usize, usize)>>,
    /// Per output: (arc, tail node) of incoming arcs from inputs and pools.
    pub output_in: Vec<Vec<(usize, NodeId)>>,
    /// Per input: outgoing arcs.
    pub input_out: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, v) in self.violations.iter().enumerate() {
            if n > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    inputs: usize,
    pools: usize,
    outputs: usize,
    attributes: usize,
    arcs: Vec<ArcRecord>,
    #[serde(default)]
    node_capacities: Vec<NodeCapacityRecord>,
    input_quality: Vec<Vec<f64>>,
    quality_lb: Vec<Vec<f64>>,
    quality_ub: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArcRecord {
    tail: NodeId,
    head: NodeId,
    weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    capacity: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeCapacityRecord {
    layer: Layer,
    index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    capacity: Option<f64>,
}

impl From<&PoolingInstance> for InstanceFile {
    fn from(inst: &PoolingInstance) -> Self {
        let mut node_capacities = Vec::new();
        for (layer, caps) in [
            (Layer::Input, &inst.input_capacity),
            (Layer::Pool, &inst.pool_capacity),
            (Layer::Output, &inst.output_capacity),
        ] {
            for (index, cap) in caps.iter().enumerate() {
                if cap.is_some() {
                    node_capacities.push(NodeCapacityRecord { layer, index, capacity: *cap });
                }
            }
        }
        InstanceFile {
            inputs: inst.inputs,
            pools: inst.pools,
            outputs: inst.outputs,
            attributes: inst.attributes,
            arcs: inst
                .arcs
                .iter()
                .map(|a| ArcRecord {
                    tail: a.tail,
                    head: a.head,
                    weight: a.weight,
                    capacity: a.capacity,
                })
                .collect(),
            node_capacities,
            input_quality: inst.input_quality.clone(),
            quality_lb: inst.quality_lb.clone(),
            quality_ub: inst.quality_ub.clone(),
        }
    }
}

impl InstanceFile {
    fn into_instance(self) -> Result<PoolingInstance, InstanceError> {
        let mut inst = PoolingInstance::empty(self.inputs, self.pools, self.outputs, self.attributes);
        for (n, rec) in self.node_capacities.into_iter().enumerate() {
            let slot = match rec.layer {
                Layer::Input => inst.input_capacity.get_mut(rec.index),
                Layer::Pool => inst.pool_capacity.get_mut(rec.index),
                Layer::Output => inst.output_capacity.get_mut(rec.index),
            };
            match slot {
                Some(slot) => *slot = rec.capacity,
                None => {
                    return Err(InstanceError::Invalid(ValidationReport {
                        violations: vec![Violation {
                            field: format!("node_capacities[{n}]"),
                            message: format!("node {}{} does not exist", rec.layer, rec.index),
                        }],
                    }))
                }
            }
        }
        inst.arcs = self
            .arcs
            .into_iter()
            .map(|r| Arc { tail: r.tail, head: r.head, weight: r.weight, capacity: r.capacity })
            .collect();
        inst.canonicalize();
        inst.input_quality = self.input_quality;
        inst.quality_lb = self.quality_lb;
        inst.quality_ub = self.quality_ub;
        Ok(inst)
    }
}

// ---------------------------------------------------------------------------
// Random generator

/// Size groups of the random benchmark family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    A,
    B,
    C,
    D,
    E,
}

impl Group {
    pub const ALL: [Group; 5] = [Group::A, Group::B, Group::C, Group::D, Group::E];

    /// (|I|, |L|, |J|, |K|)
    pub fn dims(self) -> (usize, usize, usize, usize) {
        match self {
            Group::A => (3, 2, 3, 2),
            Group::B => (5, 4, 3, 3),
            Group::C => (8, 6, 6, 4),
            Group::D => (12, 10, 8, 5),
            Group::E => (10, 10, 15, 12),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Group::A => 'A',
            Group::B => 'B',
            Group::C => 'C',
            Group::D => 'D',
            Group::E => 'E',
        }
    }
}

impl std::str::FromStr for Group {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Group::A),
            "B" => Ok(Group::B),
            "C" => Ok(Group::C),
            "D" => Ok(Group::D),
            "E" => Ok(Group::E),
            other => Err(format!("unknown group '{other}', expected one of A..E")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GeneratorSpec {
    pub group: Group,
    pub seed: u64,
}

/// SplitMix64 stream with inclusive integer draws by modular reduction.
struct Draws(SplitMix64);

impl Draws {
    fn new(seed: u64) -> Self {
        Draws(SplitMix64::seed_from_u64(seed))
    }

    fn uniform(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.0.next_u64() % (hi - lo + 1)
    }
}

/// Draws a random instance.
///
/// The PRNG is SplitMix64 seeded with `spec.seed`; `uniform{a..b}` is
/// `a + next_u64() % (b - a + 1)`. Draws are consumed in this order:
///
/// 1. input costs `c_i` on {0..5}, for each input;
/// 2. output prices `c_j` on {5..14}, for each output;
/// 3. demands `u_j` on {20..59}, for each output;
/// 4. input qualities on {0..9}, input-major then attribute;
/// 5. upper quality bounds on {2..6}, output-major then attribute;
/// 6. arc inclusion on {0..1} (1 = present), for each input: every pool,
///    then every output.
///
/// Pool-to-output arcs are always present. Weights are `c_head - c_tail`
/// with pool prices fixed to zero; lower quality bounds are zero and every
/// capacity other than `u_j` is unbounded.
pub fn generate_random(spec: GeneratorSpec) -> PoolingInstance {
    let (ni, nl, nj, nk) = spec.group.dims();
    let mut rng = Draws::new(spec.seed);

    let input_cost: Vec<f64> = (0..ni).map(|_| rng.uniform(0, 5) as f64).collect();
    let output_price: Vec<f64> = (0..nj).map(|_| rng.uniform(5, 14) as f64).collect();
    let demand: Vec<f64> = (0..nj).map(|_| rng.uniform(20, 59) as f64).collect();

    let mut inst = PoolingInstance::empty(ni, nl, nj, nk);
    inst.output_capacity = demand.into_iter().map(Some).collect();
    for i in 0..ni {
        for k in 0..nk {
            inst.input_quality[i][k] = rng.uniform(0, 9) as f64;
        }
    }
    for j in 0..nj {
        for k in 0..nk {
            inst.quality_ub[j][k] = rng.uniform(2, 6) as f64;
        }
    }

    for i in 0..ni {
        for l in 0..nl {
            if rng.uniform(0, 1) == 1 {
                inst.arcs.push(Arc {
                    tail: NodeId::input(i),
                    head: NodeId::pool(l),
                    weight: -input_cost[i],
                    capacity: None,
                });
            }
        }
        for j in 0..nj {
            if rng.uniform(0, 1) == 1 {
                inst.arcs.push(Arc {
                    tail: NodeId::input(i),
                    head: NodeId::output(j),
                    weight: output_price[j] - input_cost[i],
                    capacity: None,
                });
            }
        }
    }
    for l in 0..nl {
        for (j, price) in output_price.iter().enumerate() {
            inst.arcs.push(Arc {
                tail: NodeId::pool(l),
                head: NodeId::output(j),
                weight: *price,
                capacity: None,
            });
        }
    }
    inst.canonicalize();
    inst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> PoolingInstance {
        let mut inst = PoolingInstance::empty(2, 1, 1, 1);
        inst.add_arc(NodeId::input(0), NodeId::pool(0), -1.0, None);
        inst.add_arc(NodeId::input(1), NodeId::pool(0), -2.0, None);
        inst.add_arc(NodeId::pool(0), NodeId::output(0), 5.0, None);
        inst.output_capacity[0] = Some(10.0);
        inst.input_quality = vec![vec![3.0], vec![1.0]];
        inst.quality_ub = vec![vec![2.0]];
        inst
    }

    #[test]
    fn well_formed_instance_is_valid() {
        assert!(tiny().validate().is_valid());
    }

    #[test]
    fn inverted_quality_bounds_are_reported() {
        let mut inst = tiny();
        inst.quality_lb[0][0] = 3.0;
        let report = inst.validate();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].field, "quality_lb[0][0]");
    }

    #[test]
    fn output_to_pool_arc_is_reported() {
        let mut inst = tiny();
        inst.arcs.push(Arc {
            tail: NodeId::output(0),
            head: NodeId::pool(0),
            weight: 0.0,
            capacity: None,
        });
        let report = inst.validate();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].field, "arcs[3]");
    }

    #[test]
    fn duplicate_arc_and_missing_node() {
        let mut inst = tiny();
        inst.arcs.push(inst.arcs[0].clone());
        inst.arcs.push(Arc {
            tail: NodeId::input(7),
            head: NodeId::pool(0),
            weight: 0.0,
            capacity: None,
        });
        let fields: Vec<_> = inst.validate().violations.into_iter().map(|v| v.field).collect();
        assert_eq!(fields, vec!["arcs[3]", "arcs[4]"]);
    }

    #[test]
    fn add_arc_keeps_canonical_order() {
        let mut inst = PoolingInstance::empty(2, 1, 1, 1);
        inst.add_arc(NodeId::pool(0), NodeId::output(0), 1.0, None);
        inst.add_arc(NodeId::input(1), NodeId::output(0), 1.0, None);
        inst.add_arc(NodeId::input(1), NodeId::pool(0), 1.0, None);
        inst.add_arc(NodeId::input(0), NodeId::pool(0), 1.0, None);
        let kinds: Vec<_> = inst.arcs.iter().map(|a| (a.kind().unwrap(), a.tail.index)).collect();
        assert_eq!(
            kinds,
            vec![
                (ArcKind::InputPool, 0),
                (ArcKind::InputPool, 1),
                (ArcKind::InputOutput, 1),
                (ArcKind::PoolOutput, 0)
            ]
        );
    }

    #[test]
    fn negative_capacity_in_file_names_field() {
        let text = r#"{
            "inputs": 1, "pools": 0, "outputs": 1, "attributes": 1,
            "arcs": [{"tail": {"layer": "input", "index": 0}, "head": {"layer": "output", "index": 0}, "weight": 1.0, "capacity": -4.0}],
            "input_quality": [[1.0]], "quality_lb": [[0.0]], "quality_ub": [[2.0]]
        }"#;
        match PoolingInstance::from_json(text) {
            Err(InstanceError::Invalid(report)) => {
                assert_eq!(report.violations[0].field, "arcs[0].capacity")
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn omitted_capacities_load_as_unbounded() {
        let text = r#"{
            "inputs": 1, "pools": 0, "outputs": 1, "attributes": 1,
            "arcs": [{"tail": {"layer": "input", "index": 0}, "head": {"layer": "output", "index": 0}, "weight": 1.0}],
            "input_quality": [[1.0]], "quality_lb": [[0.0]], "quality_ub": [[2.0]]
        }"#;
        let inst = PoolingInstance::from_json(text).unwrap();
        assert_eq!(inst.arcs[0].capacity, None);
        assert_eq!(inst.output_capacity, vec![None]);
    }

    #[test]
    fn malformed_json_reports_location() {
        let err = PoolingInstance::from_json("{\n \"inputs\": 1,\n \"pools\": x }").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn group_a_seed_1_shape() {
        let inst = generate_random(GeneratorSpec { group: Group::A, seed: 1 });
        assert_eq!((inst.inputs, inst.pools, inst.outputs, inst.attributes), (3, 2, 3, 2));
        let pool_out = inst.arcs.iter().filter(|a| a.kind() == Some(ArcKind::PoolOutput)).count();
        assert_eq!(pool_out, 6);
        assert!(inst.validate().is_valid());
    }

    #[test]
    fn generator_is_deterministic() {
        let spec = GeneratorSpec { group: Group::C, seed: 99 };
        assert_eq!(generate_random(spec), generate_random(spec));
        assert_ne!(generate_random(spec), generate_random(GeneratorSpec { seed: 100, ..spec }));
    }

    #[test]
    fn generated_weights_follow_sign_convention() {
        for seed in 0..20 {
            let inst = generate_random(GeneratorSpec { group: Group::B, seed });
            for arc in &inst.arcs {
                match arc.kind().unwrap() {
                    ArcKind::InputPool => assert!((-5.0..=0.0).contains(&arc.weight)),
                    ArcKind::PoolOutput => assert!((5.0..=14.0).contains(&arc.weight)),
                    ArcKind::InputOutput => assert!((0.0..=14.0).contains(&arc.weight)),
                }
                assert_eq!(arc.capacity, None);
            }
            for (j, row) in inst.quality_ub.iter().enumerate() {
                assert!(row.iter().all(|v| (2.0..=6.0).contains(v)));
                assert!(inst.quality_lb[j].iter().all(|v| *v == 0.0));
                let u = inst.output_capacity[j].unwrap();
                assert!((20.0..=59.0).contains(&u));
            }
        }
    }
}
