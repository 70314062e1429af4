use crate::error::{Error, Result};

/// What one agent hands to aggregation: its weights and how many episodes produced them.
///
/// Nothing else crosses this boundary; replay contents, observations and
/// rewards stay with the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentUpdate {
    pub agent_id: usize,
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
    pub episodes: u64,
}

impl AgentUpdate {
    /// Number of floating-point values carried.
    pub fn payload_len(&self) -> usize {
        self.actor.len() + self.critic.len()
    }
}

/// Episode-weighted mean of the actor and critic weight vectors,
/// `Σ nᵢ·wᵢ / Σ nᵢ`, accumulated in ascending agent-id order.
pub fn aggregate(updates: &[AgentUpdate]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut ordered: Vec<&AgentUpdate> = updates.iter().collect();
    ordered.sort_by_key(|u| u.agent_id);
    let first = *ordered
        .first()
        .ok_or_else(|| Error::Config("aggregation needs at least one update".into()))?;
    for pair in ordered.windows(2) {
        if pair[0].agent_id == pair[1].agent_id {
            return Err(Error::Config(format!("agent {} sent two updates", pair[0].agent_id)));
        }
    }
    for u in &ordered {
        if u.episodes == 0 {
            return Err(Error::Config(format!("agent {} reports zero episodes", u.agent_id)));
        }
        if u.actor.len() != first.actor.len() || u.critic.len() != first.critic.len() {
            return Err(Error::Shape(format!(
                "agent {} sent {}+{} weights, expected {}+{}",
                u.agent_id,
                u.actor.len(),
                u.critic.len(),
                first.actor.len(),
                first.critic.len()
            )));
        }
    }
    let total: f64 = ordered.iter().map(|u| u.episodes as f64).sum();
    let shares: Vec<f64> = ordered.iter().map(|u| u.episodes as f64 / total).collect();
    let average = |pick: fn(&AgentUpdate) -> &[f64]| -> Vec<f64> {
        // Written as an offset from the first agent so identical inputs come back bit-exact.
        let base = pick(first);
        (0..base.len())
            .map(|k| {
                let (mut lo, mut hi) = (base[k], base[k]);
                let mut acc = base[k];
                for (u, share) in ordered.iter().zip(&shares).skip(1) {
                    let w = pick(u)[k];
                    acc += share * (w - base[k]);
                    lo = lo.min(w);
                    hi = hi.max(w);
                }
                acc.clamp(lo, hi)
            })
            .collect()
    };
    Ok((average(|u| &u.actor), average(|u| &u.critic)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn update(agent_id: usize, w: f64, episodes: u64) -> AgentUpdate {
        AgentUpdate {
            agent_id,
            actor: vec![w],
            critic: vec![-w],
            episodes,
        }
    }

    #[test]
    fn single_agent_is_identity() {
        let u = AgentUpdate {
            agent_id: 3,
            actor: vec![0.1, -7.25, 1e-300],
            critic: vec![0.3],
            episodes: 17,
        };
        let (a, c) = aggregate(std::slice::from_ref(&u)).unwrap();
        assert_eq!(a, u.actor);
        assert_eq!(c, u.critic);
    }

    #[test]
    fn weighted_by_episodes() {
        let (a, c) = aggregate(&[update(0, 2.0, 1), update(1, 4.0, 3)]).unwrap();
        assert_eq!(a, vec![3.5]);
        assert_eq!(c, vec![-3.5]);
    }

    #[test]
    fn consensus_is_exact() {
        let ups: Vec<_> = (0..5).map(|i| update(i, 0.1, i as u64 * 7 + 1)).collect();
        assert_eq!(aggregate(&ups).unwrap().0, vec![0.1]);
    }

    #[test]
    fn order_does_not_matter() {
        let ups = vec![update(2, 0.3, 5), update(0, -1.7, 2), update(1, 9.1, 11)];
        let mut rev = ups.clone();
        rev.reverse();
        assert_eq!(aggregate(&ups).unwrap(), aggregate(&rev).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(aggregate(&[]).is_err());
        assert!(aggregate(&[update(0, 1.0, 0)]).is_err());
        assert!(aggregate(&[update(0, 1.0, 1), update(0, 1.0, 1)]).is_err());
        let mut long = update(1, 1.0, 1);
        long.actor.push(0.0);
        assert!(matches!(aggregate(&[update(0, 1.0, 1), long]), Err(Error::Shape(_))));
    }
}
