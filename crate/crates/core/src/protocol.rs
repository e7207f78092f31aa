//! The protocol state machine.
//!
//! Every node `i` holds a numerator mass `yᵢ`, a denominator mass `sᵢ`, its
//! dual block `zᵢ` and two cumulative broadcast counters `σᵢ`. Every edge
//! `(i, j)` holds the last counters `ρ` that `j` has absorbed from `i`. The
//! mass still travelling along an edge is never stored: it is `σᵢ − ρ₍ᵢ,ⱼ₎`,
//! so a delayed delivery hands over everything sent since the previous one.
//!
//! Operations:
//!
//! * [`ProtocolState::send`]: node `i` keeps `1/(outdeg+1)` of its mass and
//!   publishes the same share to each out-edge through `σᵢ`.
//! * [`ProtocolState::receive`]: node `j` absorbs the outstanding mass of an
//!   in-edge.
//! * [`ProtocolState::dual_step`]: node `j` takes a proximal step on its own
//!   function and moves mass between `yⱼ` and `zⱼ`, keeping `yⱼ + zⱼ` fixed.
//! * [`ProtocolState::split`] / [`ProtocolState::combine`]: move mass to and
//!   from the auxiliary site `r`. These are never scheduled; they exist to
//!   check the potential function against its split/combine identities.
//!
//! Two totals are conserved by every operation: the `s`-mass over nodes,
//! edges and `r` is `|V|`, and the `y`-mass plus all dual blocks is `|V|·m̄`.

use serde::Serialize;

use crate::error::ProtocolError;
use crate::graph::DirectedGraph;
use crate::oracle::Vector;
use crate::problem::ProblemInstance;

/// Absolute tolerance for the two conservation laws.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub y: Vector,
    pub s: f64,
    pub z: Vector,
    pub sigma_y: Vector,
    pub sigma_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeState {
    pub rho_y: Vector,
    pub rho_s: f64,
}

/// A place that can hold mass: a node or the in-flight share of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Site {
    Node(usize),
    Edge(usize),
}

/// One protocol step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    /// Node sends (operation A).
    Send(usize),
    /// Edge delivers (operation B), by edge index.
    Receive(usize),
    /// Node takes a dual proximal step (operation C).
    DualStep(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolState {
    nodes: Vec<NodeState>,
    edges: Vec<EdgeState>,
    r_y: Vector,
    r_s: f64,
    m_bar: Vector,
    iteration: u64,
    edge_ends: Vec<(usize, usize)>,
    out_degree: Vec<usize>,
}

impl ProtocolState {
    /// Starts from `yᵢ = x̄ᵢ`, `sᵢ = 1` and empty edges.
    pub fn new(problem: &ProblemInstance) -> Self {
        Self::with_initial_mass(problem, problem.x_bar().to_vec())
            .expect("anchors sum to |V|·m̄ by definition")
    }

    /// Starts from arbitrary numerators whose sum must equal `|V|·m̄`.
    pub fn with_initial_mass(
        problem: &ProblemInstance,
        y0: Vec<Vector>,
    ) -> Result<Self, ProtocolError> {
        let graph = problem.graph();
        let n = graph.node_count();
        let m = problem.dim();
        if y0.len() != n {
            return Err(crate::error::ModelError::Invalid(format!(
                "expected {n} initial masses, got {}",
                y0.len()
            ))
            .into());
        }
        for y in &y0 {
            if y.len() != m {
                return Err(crate::error::ModelError::DimensionMismatch {
                    expected: m,
                    actual: y.len(),
                }
                .into());
            }
        }
        let m_bar = problem.m_bar();
        let expected = &m_bar * n as f64;
        let actual = y0.iter().fold(Vector::zeros(m), |acc, y| acc + y);
        let scale = expected.amax().max(1.0);
        if (&actual - &expected).amax() > MASS_TOLERANCE * scale {
            return Err(crate::error::ModelError::InitialMassMismatch {
                expected: expected.iter().copied().collect(),
                actual: actual.iter().copied().collect(),
            }
            .into());
        }
        let nodes = y0
            .into_iter()
            .map(|y| NodeState {
                y,
                s: 1.0,
                z: Vector::zeros(m),
                sigma_y: Vector::zeros(m),
                sigma_s: 0.0,
            })
            .collect();
        let edges = (0..graph.edge_count())
            .map(|_| EdgeState {
                rho_y: Vector::zeros(m),
                rho_s: 0.0,
            })
            .collect();
        Ok(Self {
            nodes,
            edges,
            r_y: Vector::zeros(m),
            r_s: 0.0,
            m_bar,
            iteration: 0,
            edge_ends: graph.edges().to_vec(),
            out_degree: (0..n).map(|i| graph.out_edges(i).len()).collect(),
        })
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &NodeState {
        &self.nodes[i]
    }

    pub fn edges(&self) -> &[EdgeState] {
        &self.edges
    }

    pub fn m_bar(&self) -> &Vector {
        &self.m_bar
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn dim(&self) -> usize {
        self.m_bar.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Mass held by the auxiliary site `r`.
    pub fn virtual_mass(&self) -> (&Vector, f64) {
        (&self.r_y, self.r_s)
    }

    /// Direct mutable access for building synthetic states in tests and
    /// diagnostics. Bypasses every protocol invariant.
    pub fn node_mut(&mut self, i: usize) -> &mut NodeState {
        &mut self.nodes[i]
    }

    /// See [`ProtocolState::node_mut`].
    pub fn edge_mut(&mut self, e: usize) -> &mut EdgeState {
        &mut self.edges[e]
    }

    /// All sites in a fixed order: nodes first, then edges.
    pub fn sites(&self) -> impl Iterator<Item = Site> {
        (0..self.nodes.len())
            .map(Site::Node)
            .chain((0..self.edges.len()).map(Site::Edge))
    }

    fn check_site(&self, site: Site) -> Result<(), ProtocolError> {
        match site {
            Site::Node(i) if i >= self.nodes.len() => Err(ProtocolError::NodeOutOfRange(i)),
            Site::Edge(e) if e >= self.edges.len() => Err(ProtocolError::EdgeOutOfRange(e)),
            _ => Ok(()),
        }
    }

    /// `(y, s)` held by a site. For edges this is `σ − ρ`.
    pub fn mass(&self, site: Site) -> (Vector, f64) {
        match site {
            Site::Node(i) => (self.nodes[i].y.clone(), self.nodes[i].s),
            Site::Edge(e) => {
                let src = &self.nodes[self.edge_ends[e].0];
                let edge = &self.edges[e];
                (&src.sigma_y - &edge.rho_y, src.sigma_s - edge.rho_s)
            }
        }
    }

    /// `x = y/s`, or `None` when the site is empty.
    pub fn local_estimate(&self, site: Site) -> Option<Vector> {
        let (y, s) = self.mass(site);
        (s > 0.0).then(|| y / s)
    }

    /// Estimate held by the auxiliary site, if it holds mass.
    pub fn virtual_estimate(&self) -> Option<Vector> {
        (self.r_s > 0.0).then(|| &self.r_y / self.r_s)
    }

    /// `Σ s` over nodes, edges and `r`.
    pub fn total_s(&self) -> f64 {
        let nodes: f64 = self.nodes.iter().map(|n| n.s).sum();
        let edges: f64 = (0..self.edges.len())
            .map(|e| self.mass(Site::Edge(e)).1)
            .sum();
        nodes + edges + self.r_s
    }

    /// `Σ y + Σ z` over nodes, edges and `r`.
    pub fn total_y_and_dual(&self) -> Vector {
        let mut total = self.r_y.clone();
        for n in &self.nodes {
            total += &n.y;
            total += &n.z;
        }
        for e in 0..self.edges.len() {
            total += self.mass(Site::Edge(e)).0;
        }
        total
    }

    /// Largest deviation of the two conserved totals from `|V|` and `|V|·m̄`.
    pub fn conservation_error(&self) -> (f64, f64) {
        let n = self.nodes.len() as f64;
        let s_err = (self.total_s() - n).abs();
        let y_err = (self.total_y_and_dual() - &self.m_bar * n).amax();
        (s_err, y_err)
    }

    fn check_node(&self, i: usize) -> Result<(), ProtocolError> {
        if i < self.nodes.len() {
            Ok(())
        } else {
            Err(ProtocolError::NodeOutOfRange(i))
        }
    }

    fn assert_virtual_empty(&self) {
        assert!(
            self.r_s == 0.0 && self.r_y.iter().all(|&v| v == 0.0),
            "auxiliary site must stay empty during protocol operations"
        );
    }

    /// Node `i` sends: divide its mass by `outdeg(i) + 1`, then add the
    /// divided mass to its broadcast counters.
    pub fn send(&mut self, i: usize) -> Result<(), ProtocolError> {
        self.check_node(i)?;
        let node = &mut self.nodes[i];
        if !(node.s > 0.0) {
            return Err(ProtocolError::NonPositiveMass { node: i, s: node.s });
        }
        let share = (self.out_degree[i] + 1) as f64;
        node.y /= share;
        node.s /= share;
        node.sigma_y += &node.y;
        node.sigma_s += node.s;
        Ok(())
    }

    /// The head of edge `e` absorbs everything sent along it since the last
    /// delivery.
    pub fn receive(&mut self, e: usize) -> Result<(), ProtocolError> {
        let &(src, dst) = self
            .edge_ends
            .get(e)
            .ok_or(ProtocolError::EdgeOutOfRange(e))?;
        let (sigma_y, sigma_s) = {
            let s = &self.nodes[src];
            (s.sigma_y.clone(), s.sigma_s)
        };
        let edge = &mut self.edges[e];
        let dy = &sigma_y - &edge.rho_y;
        let ds = sigma_s - edge.rho_s;
        edge.rho_y = sigma_y;
        edge.rho_s = sigma_s;
        let node = &mut self.nodes[dst];
        node.y += dy;
        node.s += ds;
        Ok(())
    }

    /// Node `j` replaces `zⱼ` by the dual output of a proximal step on
    /// `f = problem.function(j)` with weight `sⱼ` at `(yⱼ + zⱼ)/sⱼ`, keeping
    /// `yⱼ + zⱼ` unchanged.
    pub fn dual_step(&mut self, j: usize, problem: &ProblemInstance) -> Result<(), ProtocolError> {
        self.check_node(j)?;
        let node = &mut self.nodes[j];
        if !(node.s > 0.0) {
            return Err(ProtocolError::NonPositiveMass { node: j, s: node.s });
        }
        let total = &node.y + &node.z;
        let x_temp = &total / node.s;
        let (_, z) = problem.function(j).prox(node.s, &x_temp)?;
        node.y = total - &z;
        node.z = z;
        Ok(())
    }

    /// Moves `amount` of the `s`-mass at `site`, with the proportional share
    /// of its `y`-mass, to the empty auxiliary site.
    pub fn split(&mut self, site: Site, amount: f64) -> Result<(), ProtocolError> {
        self.check_site(site)?;
        if self.r_s != 0.0 || self.r_y.iter().any(|&v| v != 0.0) {
            return Err(ProtocolError::VirtualIndexOccupied(self.r_s));
        }
        let (y, s) = self.mass(site);
        if !(0.0..=s).contains(&amount) {
            return Err(ProtocolError::SplitOutOfRange {
                amount,
                available: s,
            });
        }
        if amount == 0.0 {
            return Ok(());
        }
        let moved_y = &y * (amount / s);
        let kept_y = &y * ((s - amount) / s);
        match site {
            Site::Node(i) => {
                let node = &mut self.nodes[i];
                node.y = kept_y;
                node.s = s - amount;
            }
            Site::Edge(e) => {
                let src = &self.nodes[self.edge_ends[e].0];
                let edge = &mut self.edges[e];
                if amount == s {
                    edge.rho_y = src.sigma_y.clone();
                    edge.rho_s = src.sigma_s;
                } else {
                    edge.rho_y += &moved_y;
                    edge.rho_s += amount;
                }
            }
        }
        self.r_y = moved_y;
        self.r_s = amount;
        Ok(())
    }

    /// Merges the auxiliary site's mass into `site` and empties it.
    pub fn combine(&mut self, site: Site) -> Result<(), ProtocolError> {
        self.check_site(site)?;
        if !(self.r_s > 0.0) {
            return Err(ProtocolError::VirtualIndexEmpty(self.r_s));
        }
        let r_y = std::mem::replace(&mut self.r_y, Vector::zeros(self.m_bar.len()));
        let r_s = std::mem::replace(&mut self.r_s, 0.0);
        match site {
            Site::Node(i) => {
                let node = &mut self.nodes[i];
                node.y += r_y;
                node.s += r_s;
            }
            Site::Edge(e) => {
                let edge = &mut self.edges[e];
                edge.rho_y -= r_y;
                edge.rho_s -= r_s;
            }
        }
        Ok(())
    }

    /// Applies one scheduled event and advances the iteration counter.
    pub fn apply(&mut self, event: Event, problem: &ProblemInstance) -> Result<(), ProtocolError> {
        self.assert_virtual_empty();
        match event {
            Event::Send(i) => self.send(i)?,
            Event::Receive(e) => self.receive(e)?,
            Event::DualStep(j) => self.dual_step(j, problem)?,
        }
        self.iteration += 1;
        Ok(())
    }

    /// JSON snapshot with one object per node and per edge.
    pub fn snapshot_json(&self) -> String {
        #[derive(Serialize)]
        struct NodeSnap<'a> {
            y: &'a [f64],
            s: f64,
            z: &'a [f64],
            sigma_y: &'a [f64],
            sigma_s: f64,
        }
        #[derive(Serialize)]
        struct EdgeSnap<'a> {
            from: usize,
            to: usize,
            rho_y: &'a [f64],
            rho_s: f64,
        }
        #[derive(Serialize)]
        struct Snap<'a> {
            iteration: u64,
            m_bar: &'a [f64],
            r_y: &'a [f64],
            r_s: f64,
            nodes: Vec<NodeSnap<'a>>,
            edges: Vec<EdgeSnap<'a>>,
        }
        let snap = Snap {
            iteration: self.iteration,
            m_bar: self.m_bar.as_slice(),
            r_y: self.r_y.as_slice(),
            r_s: self.r_s,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeSnap {
                    y: n.y.as_slice(),
                    s: n.s,
                    z: n.z.as_slice(),
                    sigma_y: n.sigma_y.as_slice(),
                    sigma_s: n.sigma_s,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .zip(&self.edge_ends)
                .map(|(e, &(from, to))| EdgeSnap {
                    from: from + 1,
                    to: to + 1,
                    rho_y: e.rho_y.as_slice(),
                    rho_s: e.rho_s,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&snap).expect("snapshot serializes")
    }
}

/// Checks that `graph` matches the topology a state was built for.
pub fn same_topology(state: &ProtocolState, graph: &DirectedGraph) -> bool {
    state.edge_ends == graph.edges()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{ConvexFunction, Matrix, QuadraticForm};

    fn scalar_problem(graph: DirectedGraph, x_bar: &[f64], f: ConvexFunction) -> ProblemInstance {
        let n = graph.node_count();
        ProblemInstance::new(
            graph,
            1,
            vec![f; n],
            x_bar.iter().map(|&v| Vector::from_vec(vec![v])).collect(),
            None,
        )
        .unwrap()
    }

    fn consensus_problem() -> ProblemInstance {
        scalar_problem(
            DirectedGraph::two_cycles(),
            &[3.0, 0.0, 1.0, 2.0, 5.0, 7.0],
            ConvexFunction::Zero,
        )
    }

    fn v(x: f64) -> Vector {
        Vector::from_vec(vec![x])
    }

    #[test]
    fn fresh_state_reproduces_anchors() {
        let p = consensus_problem();
        let st = ProtocolState::new(&p);
        for i in 0..6 {
            assert_eq!(st.local_estimate(Site::Node(i)).unwrap(), p.x_bar()[i]);
        }
        for e in 0..7 {
            assert!(st.local_estimate(Site::Edge(e)).is_none());
        }
        assert_eq!(st.conservation_error(), (0.0, 0.0));
    }

    #[test]
    fn initial_mass_is_validated() {
        let p = consensus_problem();
        let mut y0: Vec<Vector> = p.x_bar().to_vec();
        let total: f64 = y0.iter().map(|y| y[0]).sum();
        // Move everything onto node 0: only the sum matters.
        let lumped: Vec<Vector> = (0..6)
            .map(|i| v(if i == 0 { total } else { 0.0 }))
            .collect();
        assert!(ProtocolState::with_initial_mass(&p, lumped).is_ok());
        y0[2][0] += 1.0;
        assert!(matches!(
            ProtocolState::with_initial_mass(&p, y0),
            Err(ProtocolError::Model(
                crate::error::ModelError::InitialMassMismatch { .. }
            ))
        ));
    }

    #[test]
    fn send_divides_then_accumulates() {
        let p = consensus_problem();
        let mut st = ProtocolState::new(&p);
        // node 2 (one-based) has out-degree 2
        st.node_mut(1).y = v(3.0);
        st.send(1).unwrap();
        let n = st.node(1);
        assert_eq!(n.y, v(1.0));
        assert_eq!(n.s, 1.0 / 3.0);
        assert_eq!(n.sigma_y, v(1.0));
        assert_eq!(n.sigma_s, 1.0 / 3.0);
        st.send(1).unwrap();
        assert!((st.node(1).s - 1.0 / 9.0).abs() < 1e-16);
    }

    #[test]
    fn send_and_conservation() {
        let p = consensus_problem();
        let mut st = ProtocolState::new(&p);
        st.send(1).unwrap();
        st.send(1).unwrap();
        let (s_err, y_err) = st.conservation_error();
        assert!(s_err < 1e-15 && y_err < 1e-14);
    }

    #[test]
    fn zero_out_degree_send() {
        let g = DirectedGraph::new(1, vec![]).unwrap();
        let p = scalar_problem(g, &[2.0], ConvexFunction::Zero);
        let mut st = ProtocolState::new(&p);
        st.send(0).unwrap();
        assert_eq!(st.node(0).y, v(2.0));
        assert_eq!(st.node(0).s, 1.0);
        assert_eq!(st.node(0).sigma_s, 1.0);
    }

    #[test]
    fn receive_moves_outstanding_mass() {
        let p = consensus_problem();
        let mut st = ProtocolState::new(&p);
        let before = st.clone();
        st.receive(1).unwrap();
        assert_eq!(st, before, "nothing outstanding");
        // edge 1 is (2,3) one-based
        st.send(1).unwrap();
        st.receive(1).unwrap();
        assert!((st.node(2).s - (1.0 + 1.0 / 3.0)).abs() < 1e-15);
        assert_eq!(st.mass(Site::Edge(1)).1, 0.0);
    }

    #[test]
    fn receive_after_two_sends_delivers_both() {
        let p = consensus_problem();
        let mut st = ProtocolState::new(&p);
        st.send(1).unwrap();
        st.send(1).unwrap();
        st.receive(1).unwrap();
        let expected = 1.0 + 1.0 / 3.0 + 1.0 / 9.0;
        assert!((st.node(2).s - expected).abs() < 1e-15);
        let again = st.clone();
        st.receive(1).unwrap();
        assert_eq!(st, again);
    }

    #[test]
    fn dual_step_on_half_norm() {
        let q = QuadraticForm::new(Matrix::identity(1, 1), v(0.0), 0.0).unwrap();
        let p = scalar_problem(
            DirectedGraph::ring(2).unwrap(),
            &[4.0, 0.0],
            ConvexFunction::Quadratic(q),
        );
        let mut st = ProtocolState::new(&p);
        st.dual_step(0, &p).unwrap();
        assert_eq!(st.node(0).z, v(2.0));
        assert_eq!(st.node(0).y, v(2.0));
        assert!(st.conservation_error().1 < 1e-15);
    }

    #[test]
    fn dual_step_with_zero_function_is_identity() {
        let p = consensus_problem();
        let mut st = ProtocolState::new(&p);
        let before = st.clone();
        st.dual_step(3, &p).unwrap();
        assert_eq!(st, before);
    }

    #[test]
    fn dual_step_rejects_empty_node() {
        let p = consensus_problem();
        let mut st = ProtocolState::new(&p);
        st.node_mut(0).s = 0.0;
        assert!(matches!(
            st.dual_step(0, &p),
            Err(ProtocolError::NonPositiveMass { node: 0, .. })
        ));
    }

    #[test]
    fn split_is_proportional() {
        let p = consensus_problem();
        let mut st = ProtocolState::new(&p);
        st.node_mut(0).y = v(2.0);
        st.node_mut(1).y = v(-2.0 + 0.0);
        st.split(Site::Node(0), 0.25).unwrap();
        assert_eq!(st.node(0).s, 0.75);
        assert_eq!(st.node(0).y, v(1.5));
        assert_eq!(st.virtual_mass(), (&v(0.5), 0.25));
        assert_eq!(st.virtual_estimate().unwrap(), v(2.0));
    }

    #[test]
    fn split_zero_is_identity_and_errors() {
        let p = consensus_problem();
        let mut st = ProtocolState::new(&p);
        let before = st.clone();
        st.split(Site::Node(0), 0.0).unwrap();
        assert_eq!(st, before);
        assert!(matches!(
            st.split(Site::Node(0), 1.5),
            Err(ProtocolError::SplitOutOfRange { .. })
        ));
        assert!(matches!(
            st.combine(Site::Node(0)),
            Err(ProtocolError::VirtualIndexEmpty(_))
        ));
        st.split(Site::Node(0), 0.5).unwrap();
        assert!(matches!(
            st.split(Site::Node(1), 0.5),
            Err(ProtocolError::VirtualIndexOccupied(_))
        ));
    }

    #[test]
    fn split_whole_edge_empties_it() {
        let p = consensus_problem();
        let mut st = ProtocolState::new(&p);
        st.send(1).unwrap();
        let (_, s_e) = st.mass(Site::Edge(1));
        st.split(Site::Edge(1), s_e).unwrap();
        assert_eq!(st.mass(Site::Edge(1)).1, 0.0);
        st.combine(Site::Edge(4)).unwrap();
        assert!(st.conservation_error().0 < 1e-15);
    }

    #[test]
    fn invalid_indices() {
        let p = consensus_problem();
        let mut st = ProtocolState::new(&p);
        assert_eq!(st.send(6), Err(ProtocolError::NodeOutOfRange(6)));
        assert_eq!(st.receive(7), Err(ProtocolError::EdgeOutOfRange(7)));
        assert_eq!(st.dual_step(9, &p), Err(ProtocolError::NodeOutOfRange(9)));
        assert_eq!(
            st.split(Site::Edge(7), 0.0),
            Err(ProtocolError::EdgeOutOfRange(7))
        );
    }

    #[test]
    fn apply_counts_iterations() {
        let p = consensus_problem();
        let mut st = ProtocolState::new(&p);
        st.apply(Event::Receive(0), &p).unwrap();
        st.apply(Event::DualStep(0), &p).unwrap();
        assert_eq!(st.iteration(), 2);
        st.apply(Event::Send(1), &p).unwrap();
        assert_eq!(st.node(1).s, 1.0 / 3.0);
    }

    #[test]
    fn snapshot_uses_symbol_names() {
        let p = consensus_problem();
        let st = ProtocolState::new(&p);
        let json: serde_json::Value = serde_json::from_str(&st.snapshot_json()).unwrap();
        let node = &json["nodes"][0];
        for key in ["y", "s", "z", "sigma_y", "sigma_s"] {
            assert!(node.get(key).is_some(), "{key}");
        }
        assert!(json["edges"][0].get("rho_y").is_some());
        assert!(json["edges"][0].get("rho_s").is_some());
        assert!(same_topology(&st, p.graph()));
    }
}
