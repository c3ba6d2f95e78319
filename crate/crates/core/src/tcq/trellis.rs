//! Feed-forward trellis codes built from a polynomial generator matrix.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Binary polynomial in the delay operator `D`; bit `k` is the coefficient
/// of `D^k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Polynomial(pub u32);

impl Polynomial {
    pub const ZERO: Self = Self(0);
    pub const ONE: Self = Self(1);

    pub fn degree(self) -> Option<u32> {
        (self.0 != 0).then(|| 31 - self.0.leading_zeros())
    }

    pub fn coeff(self, k: u32) -> u8 {
        self.0.checked_shr(k).map_or(0, |v| (v & 1) as u8)
    }

    /// Parses `0`, `1`, `D`, `D^3`, `1+D+D^2` (spaces ignored, `d` allowed).
    pub fn parse(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::Generator("empty polynomial".into()));
        }
        let mut bits = 0u32;
        for term in compact.split('+') {
            let k = match term {
                "0" => continue,
                "1" => 0,
                "D" | "d" => 1,
                t if t.len() > 2 && (t.starts_with("D^") || t.starts_with("d^")) => t[2..]
                    .parse::<u32>()
                    .map_err(|_| Error::Generator(format!("bad exponent in '{t}'")))?,
                t => return Err(Error::Generator(format!("bad term '{t}' in '{s}'"))),
            };
            if k > 15 {
                return Err(Error::Generator(format!("degree {k} too large in '{s}'")));
            }
            bits ^= 1 << k;
        }
        Ok(Self(bits))
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return f.write_str("0");
        }
        let mut first = true;
        for k in 0..32 {
            if self.coeff(k) == 1 {
                if !first {
                    f.write_str("+")?;
                }
                first = false;
                match k {
                    0 => f.write_str("1")?,
                    1 => f.write_str("D")?,
                    _ => write!(f, "D^{k}")?,
                }
            }
        }
        Ok(())
    }
}

/// Generator matrix: one row per input bit, one column per output bit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorMatrix {
    rows: Vec<Vec<Polynomial>>,
}

impl GeneratorMatrix {
    pub fn new(rows: Vec<Vec<Polynomial>>) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || cols == 0 {
            return Err(Error::Generator("empty matrix".into()));
        }
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Generator("rows have different lengths".into()));
        }
        if cols < rows.len() {
            return Err(Error::Generator(format!("{} inputs but only {cols} outputs", rows.len())));
        }
        if cols > 16 || rows.len() > 16 {
            return Err(Error::Generator("at most 16 inputs and outputs are supported".into()));
        }
        Ok(Self { rows })
    }

    /// Parses rows like `["1 0 0 0 0", "0 0 D 1 0", "0 0 1 D^2 D"]`.
    pub fn parse_rows(rows: &[&str]) -> Result<Self> {
        let parsed = rows
            .iter()
            .map(|r| r.split_whitespace().map(Polynomial::parse).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(parsed)
    }

    /// The 8-state rate-4/5 matrix used by the relay quantizer: two uncoded
    /// inputs and the rate-2/3 code `[D 1 0; 1 D^2 D]`.
    pub fn relay_default() -> Self {
        Self::parse_rows(&["1 0 0 0 0", "0 1 0 0 0", "0 0 D 1 0", "0 0 1 D^2 D"]).expect("valid matrix")
    }

    /// The rate-2/3 coded part alone, used for 1-D quantization at 2 bits
    /// per sample.
    pub fn scalar_default() -> Self {
        Self::parse_rows(&["D 1 0", "1 D^2 D"]).expect("valid matrix")
    }

    pub fn inputs(&self) -> usize {
        self.rows.len()
    }

    pub fn outputs(&self) -> usize {
        self.rows[0].len()
    }

    pub fn entry(&self, row: usize, col: usize) -> Polynomial {
        self.rows[row][col]
    }

    pub fn rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|p| format!("{p}")).collect::<Vec<_>>().join(" "))
            .collect()
    }

    fn row_memory(&self, row: usize) -> u32 {
        self.rows[row].iter().filter_map(|p| p.degree()).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trellis {
    generator: GeneratorMatrix,
    num_states: usize,
    inputs: usize,
    outputs: usize,
    /// `next[s * 2^inputs + u]`
    next: Vec<usize>,
    /// Output label; bit `c` is output column `c`.
    label: Vec<usize>,
    /// Output columns ordered from the finest partition level to the
    /// coarsest: state-only coded columns, other coded columns, uncoded.
    partition_order: Vec<usize>,
    uncoded_inputs: usize,
}

impl Trellis {
    pub fn build(generator: &GeneratorMatrix) -> Result<Self> {
        let k = generator.inputs();
        let n = generator.outputs();
        let memories: Vec<u32> = (0..k).map(|r| generator.row_memory(r)).collect();
        let total: u32 = memories.iter().sum();
        if total > 16 {
            return Err(Error::Generator(format!("total memory {total} is too large")));
        }
        let num_states = 1usize << total;
        let offsets: Vec<u32> = memories
            .iter()
            .scan(0, |acc, &m| {
                let o = *acc;
                *acc += m;
                Some(o)
            })
            .collect();
        let branches = 1usize << k;
        let mut next = vec![0; num_states * branches];
        let mut label = vec![0; num_states * branches];
        for s in 0..num_states {
            for u in 0..branches {
                let mut ns = 0usize;
                let mut out = 0usize;
                for r in 0..k {
                    let mem = memories[r];
                    let reg = (s >> offsets[r]) & ((1 << mem) - 1);
                    let bit = (u >> r) & 1;
                    // history word: bit d is the input d steps ago
                    let hist = bit | (reg << 1);
                    for c in 0..n {
                        let g = generator.entry(r, c).0 as usize;
                        if (g & hist).count_ones() & 1 == 1 {
                            out ^= 1 << c;
                        }
                    }
                    if mem > 0 {
                        let shifted = hist & ((1 << mem) - 1);
                        ns |= shifted << offsets[r];
                    }
                }
                next[s * branches + u] = ns;
                label[s * branches + u] = out;
            }
        }

        // classify output columns
        let coded_row = |r: usize| memories[r] > 0;
        let mut state_only = Vec::new();
        let mut coded = Vec::new();
        let mut uncoded = Vec::new();
        for c in 0..n {
            let touches_coded = (0..k).any(|r| coded_row(r) && generator.entry(r, c) != Polynomial::ZERO);
            let has_input_now = (0..k).any(|r| generator.entry(r, c).coeff(0) == 1);
            if touches_coded && !has_input_now {
                state_only.push(c);
            } else if touches_coded {
                coded.push(c);
            } else {
                uncoded.push(c);
            }
        }
        let partition_order: Vec<usize> = state_only.into_iter().chain(coded).chain(uncoded).collect();
        let uncoded_inputs = (0..k).filter(|&r| !coded_row(r)).count();

        let t = Self {
            generator: generator.clone(),
            num_states,
            inputs: k,
            outputs: n,
            next,
            label,
            partition_order,
            uncoded_inputs,
        };
        for s in 0..num_states {
            let mut seen: Vec<usize> = (0..branches).map(|u| t.label(s, u)).collect();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != branches {
                return Err(Error::Generator(format!("branches leaving state {s} share output labels")));
            }
        }
        Ok(t)
    }

    pub fn generator(&self) -> &GeneratorMatrix {
        &self.generator
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Input bits per step.
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    /// Output bits per step.
    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn branches_per_state(&self) -> usize {
        1 << self.inputs
    }

    pub fn num_labels(&self) -> usize {
        1 << self.outputs
    }

    pub fn uncoded_inputs(&self) -> usize {
        self.uncoded_inputs
    }

    pub fn partition_order(&self) -> &[usize] {
        &self.partition_order
    }

    #[inline]
    pub fn next_state(&self, state: usize, input: usize) -> usize {
        self.next[(state << self.inputs) | input]
    }

    #[inline]
    pub fn label(&self, state: usize, input: usize) -> usize {
        self.label[(state << self.inputs) | input]
    }

    /// Labels on the branches leaving `state`, sorted and deduplicated.
    pub fn labels_from(&self, state: usize) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.branches_per_state()).map(|u| self.label(state, u)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Runs the encoder from state 0; returns the labels and the state
    /// occupied before each step.
    pub fn encode(&self, inputs: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let mut s = 0;
        let mut labels = Vec::with_capacity(inputs.len());
        let mut states = Vec::with_capacity(inputs.len());
        for &u in inputs {
            states.push(s);
            labels.push(self.label(s, u));
            s = self.next_state(s, u);
        }
        (labels, states)
    }

    /// Reorders a label's bits so that bit `l` is the partition level-`l`
    /// bit.
    pub fn label_to_partition(&self, label: usize) -> usize {
        self.partition_order
            .iter()
            .enumerate()
            .fold(0, |acc, (l, &c)| acc | (((label >> c) & 1) << l))
    }
}
