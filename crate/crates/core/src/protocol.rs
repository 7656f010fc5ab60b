//! The four-token channel and the two ways of driving it: the fixed
//! quadrant rule and a learned symbol Q-head.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gridworld::{GridPos, Observation};
use crate::neural::{epsilon_greedy, AdamState, Mlp};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    CA = 0,
    CB = 1,
    CC = 2,
    CD = 3,
}

impl Symbol {
    pub const COUNT: usize = 4;
    pub const ALL: [Symbol; 4] = [Symbol::CA, Symbol::CB, Symbol::CC, Symbol::CD];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn label(self) -> &'static str {
        ["C_A", "C_B", "C_C", "C_D"][self.index()]
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One-hot encoding; `None` encodes as all zeros.
pub fn encode_symbol(symbol: Option<Symbol>) -> [f64; Symbol::COUNT] {
    let mut v = [0.0; Symbol::COUNT];
    if let Some(s) = symbol {
        v[s.index()] = 1.0;
    }
    v
}

/// Inverse of [`encode_symbol`]. Anything that is not an exact one-hot or
/// all-zero vector is rejected.
pub fn decode_symbol(encoded: &[f64]) -> Result<Option<Symbol>> {
    if encoded.len() != Symbol::COUNT {
        return Err(Error::DimensionMismatch {
            expected: Symbol::COUNT,
            actual: encoded.len(),
        });
    }
    let ones: Vec<usize> = (0..Symbol::COUNT).filter(|&i| encoded[i] == 1.0).collect();
    let zeros = encoded.iter().filter(|&&v| v == 0.0).count();
    match (ones.as_slice(), zeros) {
        ([], 4) => Ok(None),
        ([i], 3) => Ok(Symbol::from_index(*i)),
        _ => Err(Error::InvalidArgument(format!(
            "not a one-hot symbol encoding: {encoded:?}"
        ))),
    }
}

/// Fixed rule: the quadrant of `treasure - self_pos`, with zero offsets
/// counted as non-negative.
///
/// | dx  | dy  | symbol |
/// |-----|-----|--------|
/// | >=0 | >=0 | C_A    |
/// | >=0 | <0  | C_B    |
/// | <0  | >=0 | C_C    |
/// | <0  | <0  | C_D    |
pub fn psp_symbol(self_pos: GridPos, treasure: GridPos) -> Symbol {
    let east = treasure.x >= self_pos.x;
    let north = treasure.y >= self_pos.y;
    match (east, north) {
        (true, true) => Symbol::CA,
        (true, false) => Symbol::CB,
        (false, true) => Symbol::CC,
        (false, false) => Symbol::CD,
    }
}

/// Epsilon-greedy choice over the head's four symbol values.
pub fn ec_symbol_select<R: Rng + ?Sized>(
    head: &Mlp,
    obs: &Observation,
    epsilon: f64,
    rng: &mut R,
) -> Result<Symbol> {
    if head.out_dim() != Symbol::COUNT {
        return Err(Error::DimensionMismatch {
            expected: Symbol::COUNT,
            actual: head.out_dim(),
        });
    }
    let q = head.predict(obs.as_slice())?;
    Ok(symbol_from_values(&q, epsilon, rng))
}

pub(crate) fn symbol_from_values<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> Symbol {
    Symbol::from_index(epsilon_greedy(q, epsilon, rng)).expect("four symbol values")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    /// Emergent: symbols chosen by a learned head.
    Ec,
    /// Pre-defined quadrant protocol.
    Psp,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::Ec, Condition::Psp];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Ec => "ec",
            Condition::Psp => "psp",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ec" => Ok(Condition::Ec),
            "psp" => Ok(Condition::Psp),
            other => Err(Error::InvalidArgument(format!(
                "unknown condition {other:?}"
            ))),
        }
    }
}

/// How an agent produces its outgoing symbol.
#[derive(Debug, Clone)]
pub enum CommPolicy {
    Psp,
    Ec { head: Mlp, adam: AdamState },
}

impl CommPolicy {
    pub fn new<R: Rng + ?Sized>(condition: Condition, hidden: usize, rng: &mut R) -> Result<Self> {
        match condition {
            Condition::Psp => Ok(CommPolicy::Psp),
            Condition::Ec => {
                let head = Mlp::init(crate::gridworld::OBS_DIM, hidden, Symbol::COUNT, rng)?;
                let adam = AdamState::new(&head);
                Ok(CommPolicy::Ec { head, adam })
            }
        }
    }

    pub fn condition(&self) -> Condition {
        match self {
            CommPolicy::Psp => Condition::Psp,
            CommPolicy::Ec { .. } => Condition::Ec,
        }
    }

    pub fn head(&self) -> Option<&Mlp> {
        match self {
            CommPolicy::Psp => None,
            CommPolicy::Ec { head, .. } => Some(head),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::MlpParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn head_with_bias(bias: [f64; 4]) -> Mlp {
        let mut p = MlpParams::zeros(8, 4, 4);
        p.b2.copy_from_slice(&bias);
        Mlp::from_params(p).unwrap()
    }

    #[test]
    fn quadrant_examples() {
        assert_eq!(
            psp_symbol(GridPos::new(0, 0), GridPos::new(3, 2)),
            Symbol::CA
        );
        assert_eq!(
            psp_symbol(GridPos::new(4, 4), GridPos::new(1, 2)),
            Symbol::CD
        );
        assert_eq!(
            psp_symbol(GridPos::new(2, 2), GridPos::new(2, 2)),
            Symbol::CA
        );
        assert_eq!(
            psp_symbol(GridPos::new(0, 4), GridPos::new(3, 1)),
            Symbol::CB
        );
        assert_eq!(
            psp_symbol(GridPos::new(4, 0), GridPos::new(1, 2)),
            Symbol::CC
        );
    }

    #[test]
    fn quadrant_rule_covers_all_symbols_and_is_constant_per_region() {
        let mut seen = [false; 4];
        for sx in 0..5 {
            for sy in 0..5 {
                for tx in 0..5 {
                    for ty in 0..5 {
                        let s = psp_symbol(GridPos::new(sx, sy), GridPos::new(tx, ty));
                        seen[s.index()] = true;
                        let dx = tx as i64 - sx as i64;
                        let dy = ty as i64 - sy as i64;
                        let expected = match (dx >= 0, dy >= 0) {
                            (true, true) => Symbol::CA,
                            (true, false) => Symbol::CB,
                            (false, true) => Symbol::CC,
                            (false, false) => Symbol::CD,
                        };
                        assert_eq!(s, expected);
                    }
                }
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn greedy_head_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obs = Observation([0.0; 8]);
        let head = head_with_bias([0.1, 0.9, 0.2, 0.2]);
        assert_eq!(
            ec_symbol_select(&head, &obs, 0.0, &mut rng).unwrap(),
            Symbol::CB
        );
        let flat = head_with_bias([0.3; 4]);
        assert_eq!(
            ec_symbol_select(&flat, &obs, 0.0, &mut rng).unwrap(),
            Symbol::CA
        );
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let head = head_with_bias([0.1, 0.9, 0.2, 0.2]);
        let obs = Observation([0.0; 8]);
        let n = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[ec_symbol_select(&head, &obs, 1.0, &mut rng)
                .unwrap()
                .index()] += 1;
        }
        let p = 0.25;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn head_with_wrong_width_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let head = Mlp::from_params(MlpParams::zeros(8, 4, 5)).unwrap();
        assert!(ec_symbol_select(&head, &Observation([0.0; 8]), 0.0, &mut rng).is_err());
    }

    #[test]
    fn encoding() {
        assert_eq!(encode_symbol(Some(Symbol::CC)), [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(encode_symbol(None), [0.0; 4]);
        for s in Symbol::ALL {
            assert_eq!(decode_symbol(&encode_symbol(Some(s))).unwrap(), Some(s));
        }
        assert_eq!(decode_symbol(&[0.0; 4]).unwrap(), None);
        assert!(decode_symbol(&[1.0, 1.0, 0.0, 0.0]).is_err());
        assert!(decode_symbol(&[0.5, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn condition_parsing() {
        assert_eq!("EC".parse::<Condition>().unwrap(), Condition::Ec);
        assert_eq!("psp".parse::<Condition>().unwrap(), Condition::Psp);
        assert!("natural".parse::<Condition>().is_err());
    }
}
