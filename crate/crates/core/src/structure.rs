//! Marginal-action correspondences and the conditions under which the
//! rationalization bounds are known to be tight.
//!
//! `φ_i(a, a')` collects the opponent profiles at which switching from `a`
//! to `a'` gains strictly less than its best case. `Φ_i(a)` is the union over
//! rivals `a'`, and `a ⇒ b` whenever `b ∈ Φ_i(a)`. Graph-level analysis is
//! limited to two players.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::game::{payoff_differences, payoff_gap, StaticGame};
use crate::model::PopulationGame;
use crate::qre::enumerate_qre_2x2;

/// A difference within this distance of the maximum counts as equal to it.
pub const PHI_TOL: f64 = 1e-9;

/// Opponent profiles (by index, see [`StaticGame::opponent_profile`]) at
/// which `u_i(a', ·) − u_i(a, ·)` falls strictly below its maximum.
///
/// When the differences spread over no more than `2 · PHI_TOL` they are
/// treated as constant and the set is empty, so `φ(a, a')` and `φ(a', a)`
/// are either both empty or cover every opponent profile.
pub fn phi(game: &StaticGame, i: usize, a: usize, a2: usize) -> Result<Vec<usize>> {
    let gap = payoff_gap(game, i, a, a2)?;
    let d = payoff_differences(game, i, a, a2)?;
    if gap.spread() <= 2.0 * PHI_TOL {
        return Ok(Vec::new());
    }
    Ok(d.iter()
        .enumerate()
        .filter(|(_, x)| **x < gap.upper - PHI_TOL)
        .map(|(o, _)| o)
        .collect())
}

/// `Φ_i(a)`: union of `φ_i(a, a')` over every rival `a'`, sorted.
pub fn marginal_set(game: &StaticGame, i: usize, a: usize) -> Result<Vec<usize>> {
    game.check_action(i, a)?;
    let mut out = Vec::new();
    for a2 in (0..game.num_actions(i)).filter(|&b| b != a) {
        out.extend(phi(game, i, a, a2)?);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Node {
    pub player: usize,
    pub action: usize,
}

impl Node {
    pub fn new(player: usize, action: usize) -> Self {
        Node { player, action }
    }
}

/// The `⇒` relation of a two-player game. Edges always cross players.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalGraph {
    nodes: Vec<Node>,
    /// `succ[k]` lists successors of `nodes[k]`.
    succ: Vec<Vec<Node>>,
}

fn require_two_players(game: &StaticGame) -> Result<()> {
    if game.num_players() != 2 {
        return Err(Error::Unsupported(format!(
            "marginal graph analysis needs two players, got {}",
            game.num_players()
        )));
    }
    Ok(())
}

pub fn marginal_graph(game: &StaticGame) -> Result<MarginalGraph> {
    require_two_players(game)?;
    let mut nodes = Vec::new();
    let mut succ = Vec::new();
    for i in 0..2 {
        for a in 0..game.num_actions(i) {
            nodes.push(Node::new(i, a));
            succ.push(
                marginal_set(game, i, a)?
                    .into_iter()
                    .map(|b| Node::new(1 - i, b))
                    .collect(),
            );
        }
    }
    Ok(MarginalGraph { nodes, succ })
}

impl MarginalGraph {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    fn index(&self, n: Node) -> Option<usize> {
        self.nodes.iter().position(|&m| m == n)
    }

    pub fn successors(&self, n: Node) -> &[Node] {
        self.index(n).map_or(&[], |k| &self.succ[k])
    }

    pub fn edges(&self) -> Vec<(Node, Node)> {
        self.nodes
            .iter()
            .zip(&self.succ)
            .flat_map(|(&from, to)| to.iter().map(move |&t| (from, t)))
            .collect()
    }

    /// DOT digraph with node ids formed from the action name and the
    /// 1-based player index, e.g. `NV1 -> V2;`.
    pub fn to_dot(&self, game: &StaticGame) -> String {
        let id = |n: Node| {
            dot_id(&format!(
                "{}{}",
                game.actions(n.player)[n.action],
                n.player + 1
            ))
        };
        let mut s = String::from("digraph marginal {\n");
        for n in &self.nodes {
            s.push_str(&format!("  {};\n", id(*n)));
        }
        for (from, to) in self.edges() {
            s.push_str(&format!("  {} -> {};\n", id(from), id(to)));
        }
        s.push_str("}\n");
        s
    }
}

fn dot_id(raw: &str) -> String {
    let plain = !raw.is_empty()
        && raw.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !raw.starts_with(|c: char| c.is_ascii_digit());
    if plain {
        raw.to_string()
    } else {
        format!("\"{}\"", raw.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

/// Weakly connected component of `node`, in node order.
pub fn reachable_set(graph: &MarginalGraph, node: Node) -> Result<Vec<Node>> {
    let start = graph.index(node).ok_or(Error::UnknownAction {
        player: node.player,
        action: node.action,
    })?;
    let n = graph.nodes.len();
    let mut adj = vec![Vec::new(); n];
    for (k, to) in graph.succ.iter().enumerate() {
        for t in to {
            let j = graph.index(*t).expect("edges stay inside the graph");
            adj[k].push(j);
            adj[j].push(k);
        }
    }
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(k) = queue.pop_front() {
        for &j in &adj[k] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    Ok(graph
        .nodes
        .iter()
        .zip(seen)
        .filter(|(_, s)| *s)
        .map(|(n, _)| *n)
        .collect())
}

fn c2_in(graph: &MarginalGraph, n: Node) -> bool {
    match graph.successors(n) {
        [b] => graph.successors(*b) == [n],
        _ => false,
    }
}

/// `|Φ_i(a)| = 1` and the unique marginal action points back to exactly `{a}`.
pub fn condition_c2(game: &StaticGame, i: usize, a: usize) -> Result<bool> {
    require_two_players(game)?;
    game.check_action(i, a)?;
    Ok(c2_in(&marginal_graph(game)?, Node::new(i, a)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeClass {
    pub node: Node,
    /// `Φ(a) = ∅`.
    pub non_serial: bool,
    /// Some marginal action of `a` is non-serial.
    pub eventually_non_serial: bool,
    /// `non_serial || eventually_non_serial`.
    pub c1: bool,
    pub c2: bool,
    /// The weakly connected component of `a` is not the whole graph.
    pub c2_prime: bool,
    pub reach: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub nodes: Vec<NodeClass>,
    /// No action anywhere is non-serial.
    pub serial: bool,
}

impl Classification {
    pub fn get(&self, n: Node) -> Option<&NodeClass> {
        self.nodes.iter().find(|c| c.node == n)
    }
}

pub fn classify(game: &StaticGame) -> Result<Classification> {
    let graph = marginal_graph(game)?;
    let total = graph.nodes.len();
    let nodes = graph
        .nodes
        .iter()
        .map(|&n| {
            let succ = graph.successors(n);
            let non_serial = succ.is_empty();
            let eventually_non_serial = succ.iter().any(|&b| graph.successors(b).is_empty());
            let reach = reachable_set(&graph, n)?;
            Ok(NodeClass {
                node: n,
                non_serial,
                eventually_non_serial,
                c1: non_serial || eventually_non_serial,
                c2: c2_in(&graph, n),
                c2_prime: reach.len() != total,
                reach,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let serial = nodes.iter().all(|c| !c.non_serial);
    Ok(Classification { nodes, serial })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TightnessReason {
    C1,
    C2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    GuaranteedTight(TightnessReason),
    StrictlyLoose,
    Undetermined,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::GuaranteedTight(TightnessReason::C1) => write!(f, "GUARANTEED_TIGHT (C1)"),
            Verdict::GuaranteedTight(TightnessReason::C2) => write!(f, "GUARANTEED_TIGHT (C2)"),
            Verdict::StrictlyLoose => write!(f, "STRICTLY_LOOSE"),
            Verdict::Undetermined => write!(f, "UNDETERMINED"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2Report {
    pub classification: Classification,
    pub verdicts: Vec<(Node, Verdict)>,
    /// Number of enumerated QREs, when enumeration was needed and possible.
    pub qre_count: Option<usize>,
    /// The game is not 2×2, so the conditions are only relaxed criteria and
    /// every verdict is `Undetermined`.
    pub relaxed_only: bool,
}

pub const RELAXED_NOTICE: &str = "conditions are relaxed criteria only outside two-by-two games";

/// Tightness verdict for each action of a two-player game.
///
/// In a 2×2 game an action is guaranteed tight under C1 or C2. If some
/// action meets neither and the game has several QREs, every bound is
/// strictly below the lower envelope. Anything else is undetermined.
pub fn theorem2_report(pg: &PopulationGame, grid: usize) -> Result<Theorem2Report> {
    let game = pg.game();
    let classification = classify(game)?;
    if !game.is_two_by_two() {
        let verdicts = classification
            .nodes
            .iter()
            .map(|c| (c.node, Verdict::Undetermined))
            .collect();
        return Ok(Theorem2Report {
            classification,
            verdicts,
            qre_count: None,
            relaxed_only: true,
        });
    }
    let uncovered = classification.nodes.iter().any(|c| !c.c1 && !c.c2);
    let qre_count = if uncovered {
        Some(enumerate_qre_2x2(pg, grid)?.len())
    } else {
        None
    };
    let loose = qre_count.is_some_and(|k| k > 1);
    let verdicts = classification
        .nodes
        .iter()
        .map(|c| {
            let v = if loose {
                Verdict::StrictlyLoose
            } else if c.c1 {
                Verdict::GuaranteedTight(TightnessReason::C1)
            } else if c.c2 {
                Verdict::GuaranteedTight(TightnessReason::C2)
            } else {
                Verdict::Undetermined
            };
            (c.node, v)
        })
        .collect();
    Ok(Theorem2Report {
        classification,
        verdicts,
        qre_count,
        relaxed_only: false,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Prop3Outcome {
    Inapplicable(String),
    /// No action satisfies C2.
    Holds,
    Counterexample(Node),
}

/// In a serial two-player game where some player has more than two
/// actions, no action satisfies C2.
pub fn prop3_check(game: &StaticGame) -> Result<Prop3Outcome> {
    if game.num_players() != 2 {
        return Ok(Prop3Outcome::Inapplicable("needs two players".into()));
    }
    if game.action_counts().iter().all(|&k| k <= 2) {
        return Ok(Prop3Outcome::Inapplicable(
            "no player has more than two actions".into(),
        ));
    }
    let class = classify(game)?;
    if !class.serial {
        return Ok(Prop3Outcome::Inapplicable("game is not serial".into()));
    }
    Ok(match class.nodes.iter().find(|c| c.c2) {
        Some(c) => Prop3Outcome::Counterexample(c.node),
        None => Prop3Outcome::Holds,
    })
}
