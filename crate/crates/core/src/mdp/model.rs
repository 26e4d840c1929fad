//! The MDP data model and the appeal reduction gadget.

use std::collections::{BTreeMap, HashMap};
use std::ops::Index;

use serde::{Deserialize, Serialize};

use super::MdpError;
use crate::numerics::Rational;

pub type StateId = usize;
pub type ActionId = usize;

/// One action of a state, with its reward and transition distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub state: StateId,
    pub reward: Rational,
    /// Successor distribution sorted by state id; zero entries are dropped.
    pub transitions: Vec<(StateId, Rational)>,
    /// Human-readable tag, conventionally the name of the state the action
    /// leads towards.
    pub label: String,
}

impl Action {
    /// Probability `p(t, a)` of moving to `t`.
    pub fn prob(&self, t: StateId) -> Rational {
        self.transitions.iter().find(|(s, _)| *s == t).map(|(_, p)| p.clone()).unwrap_or_default()
    }
}

/// A finite MDP `(S, (A_s), p, r)` with named states.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Mdp {
    names: Vec<String>,
    by_name: HashMap<String, StateId>,
    actions: Vec<Action>,
    by_state: Vec<Vec<ActionId>>,
}

impl Mdp {
    pub fn new() -> Self {
        Mdp::default()
    }

    /// Adds a fresh state with a unique name.
    pub fn add_state(&mut self, name: impl Into<String>) -> Result<StateId, MdpError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(MdpError::DuplicateState(name));
        }
        let id = self.names.len();
        self.by_name.insert(name.clone(), id);
        self.names.push(name);
        self.by_state.push(Vec::new());
        Ok(id)
    }

    /// Adds an action at `state`. Probabilities must lie in `[0, 1]` and sum
    /// to exactly 1; repeated successors are merged.
    pub fn add_action(
        &mut self,
        state: StateId,
        reward: Rational,
        transitions: Vec<(StateId, Rational)>,
        label: impl Into<String>,
    ) -> Result<ActionId, MdpError> {
        self.check_state(state)?;
        let mut merged: BTreeMap<StateId, Rational> = BTreeMap::new();
        for (t, p) in transitions {
            self.check_state(t)?;
            if p.is_negative() || p > Rational::one() {
                return Err(MdpError::BadProbability(format!("p = {p} at state {}", self.names[state])));
            }
            *merged.entry(t).or_default() += p;
        }
        let total: Rational = merged.values().sum();
        if !total.is_one() {
            return Err(MdpError::BadProbability(format!(
                "transition mass {total} at state {} (must be 1)",
                self.names[state]
            )));
        }
        let transitions = merged.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        let id = self.actions.len();
        self.actions.push(Action { state, reward, transitions, label: label.into() });
        self.by_state[state].push(id);
        Ok(id)
    }

    /// Convenience: a deterministic action from `s` to `t`, labelled with `t`'s name.
    pub fn add_edge(&mut self, s: StateId, t: StateId, reward: Rational) -> Result<ActionId, MdpError> {
        self.check_state(t)?;
        let label = self.names[t].clone();
        self.add_action(s, reward, vec![(t, Rational::one())], label)
    }

    fn check_state(&self, s: StateId) -> Result<(), MdpError> {
        if s < self.names.len() {
            Ok(())
        } else {
            Err(MdpError::UnknownState(format!("#{s}")))
        }
    }

    pub fn state_count(&self) -> usize {
        self.names.len()
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    pub fn action(&self, a: ActionId) -> &Action {
        &self.actions[a]
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn actions_of(&self, s: StateId) -> &[ActionId] {
        &self.by_state[s]
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.names[s]
    }

    pub fn state_names(&self) -> &[String] {
        &self.names
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.by_name.get(name).copied()
    }

    /// Looks up a state by name, failing loudly when absent.
    pub fn require_state(&self, name: &str) -> Result<StateId, MdpError> {
        self.state_id(name).ok_or_else(|| MdpError::UnknownState(name.to_string()))
    }

    /// First action at `s` whose label equals `label`.
    pub fn find_action(&self, s: StateId, label: &str) -> Option<ActionId> {
        self.by_state[s].iter().copied().find(|&a| self.actions[a].label == label)
    }

    /// Human-readable `state -> label` description of an action.
    pub fn describe_action(&self, a: ActionId) -> String {
        let act = &self.actions[a];
        format!("{} -> {}", self.names[act.state], act.label)
    }

    /// Whether `s` has a single zero-reward self-loop.
    pub fn is_absorbing_sink(&self, s: StateId) -> bool {
        let acts = &self.by_state[s];
        acts.len() == 1 && {
            let a = &self.actions[acts[0]];
            a.reward.is_zero() && a.transitions.len() == 1 && a.transitions[0].0 == s
        }
    }

    /// Checks the structural invariants: every state has an action and every
    /// distribution sums to 1.
    pub fn validate(&self) -> Result<(), MdpError> {
        for (s, acts) in self.by_state.iter().enumerate() {
            if acts.is_empty() {
                return Err(MdpError::NoActions(self.names[s].clone()));
            }
        }
        for a in &self.actions {
            let total: Rational = a.transitions.iter().map(|(_, p)| p).sum();
            if !total.is_one() {
                return Err(MdpError::BadProbability(format!("mass {total} at {}", self.names[a.state])));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> MdpJson {
        MdpJson {
            states: self.names.clone(),
            actions: self
                .actions
                .iter()
                .map(|a| ActionJson {
                    state: self.names[a.state].clone(),
                    label: a.label.clone(),
                    reward: a.reward.clone(),
                    p: a.transitions.iter().map(|(t, p)| (self.names[*t].clone(), p.clone())).collect(),
                })
                .collect(),
        }
    }

    pub fn from_json(doc: &MdpJson) -> Result<Mdp, MdpError> {
        let mut m = Mdp::new();
        for s in &doc.states {
            m.add_state(s.clone())?;
        }
        for a in &doc.actions {
            let s = m.require_state(&a.state)?;
            let tr = a.p.iter().map(|(t, p)| Ok((m.require_state(t)?, p.clone()))).collect::<Result<Vec<_>, MdpError>>()?;
            m.add_action(s, a.reward.clone(), tr, a.label.clone())?;
        }
        m.validate()?;
        Ok(m)
    }
}

/// Serialized form of an MDP; probabilities and rewards are `p/q` strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdpJson {
    pub states: Vec<String>,
    pub actions: Vec<ActionJson>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionJson {
    pub state: String,
    pub label: String,
    pub reward: Rational,
    pub p: BTreeMap<String, Rational>,
}

/// Name of the intermediate state of `Gadget(s, t, …)`.
pub fn gadget_state_name(s: &str, t: &str) -> String {
    format!("({s},{t})")
}

/// Adds the appeal reduction gadget `Gadget(s, t, r_d, p, r_f)`: a new state
/// `(s,t)` with a single deterministic action to `t` of reward `r_f`, and a
/// new action at `s` of reward `r_d` that moves to `(s,t)` with probability
/// `p` and stays at `s` otherwise. Returns the new action at `s`.
pub fn add_gadget(
    m: &mut Mdp,
    s: StateId,
    t: StateId,
    r_d: Rational,
    r_f: Rational,
    p: Rational,
) -> Result<ActionId, MdpError> {
    if !p.is_positive() || p > Rational::one() {
        return Err(MdpError::BadProbability(format!("gadget probability {p} outside (0, 1]")));
    }
    m.check_state(s)?;
    m.check_state(t)?;
    let t_name = m.state_name(t).to_string();
    let mid = m.add_state(gadget_state_name(m.state_name(s), &t_name))?;
    m.add_action(mid, r_f, vec![(t, Rational::one())], t_name.clone())?;
    let stay = Rational::one() - &p;
    m.add_action(s, r_d, vec![(mid, p), (s, stay)], t_name)
}

/// A deterministic memoryless policy: one chosen action per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Policy(Vec<ActionId>);

impl Policy {
    /// Validates that `choice[s]` is an action of `s` for every state.
    pub fn new(m: &Mdp, choice: Vec<ActionId>) -> Result<Self, MdpError> {
        if choice.len() != m.state_count() {
            return Err(MdpError::InvalidPolicy(format!("{} choices for {} states", choice.len(), m.state_count())));
        }
        for (s, &a) in choice.iter().enumerate() {
            if a >= m.action_count() || m.action(a).state != s {
                return Err(MdpError::InvalidPolicy(format!("action #{a} does not belong to state {}", m.state_name(s))));
            }
        }
        Ok(Policy(choice))
    }

    /// The policy choosing each state's first action.
    pub fn first_actions(m: &Mdp) -> Result<Self, MdpError> {
        m.validate()?;
        Ok(Policy((0..m.state_count()).map(|s| m.actions_of(s)[0]).collect()))
    }

    pub fn get(&self, s: StateId) -> ActionId {
        self.0[s]
    }

    /// Replaces the choice at the owning state of `a`.
    pub fn switch_to(&mut self, m: &Mdp, a: ActionId) {
        self.0[m.action(a).state] = a;
    }

    pub fn choices(&self) -> &[ActionId] {
        &self.0
    }

    pub fn uses(&self, m: &Mdp, a: ActionId) -> bool {
        self.0[m.action(a).state] == a
    }
}

/// State values `val^σ` of a policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Valuation(pub Vec<Rational>);

impl Valuation {
    pub fn get(&self, s: StateId) -> &Rational {
        &self.0[s]
    }

    pub fn as_slice(&self) -> &[Rational] {
        &self.0
    }

    /// Largest value over all states.
    pub fn max(&self) -> Rational {
        self.0.iter().cloned().max().unwrap_or_default()
    }
}

impl Index<StateId> for Valuation {
    type Output = Rational;
    fn index(&self, s: StateId) -> &Rational {
        &self.0[s]
    }
}
