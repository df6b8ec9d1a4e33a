//! Exact finite-alphabet probability calculus.
//!
//! A [`JointDistribution`] is a dense tensor over an ordered list of named
//! variables, the first variable varying slowest. A [`Channel`] is a
//! row-stochastic kernel from one named input to an ordered list of named
//! outputs. All information measures are in bits.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of cells of any dense joint.
pub const DEFAULT_CELL_LIMIT: usize = 10_000_000;

/// Probabilities below this are treated as exact zeros inside logarithms.
pub const ZERO_THRESHOLD: f64 = 1e-15;

/// Normalization tolerance for distributions and kernel rows.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Information values below this are round-off and reported as zero.
pub const INFO_FLOOR: f64 = 1e-13;

/// Maps round-off (negative or below [`INFO_FLOOR`]) to an exact zero.
pub fn snap_information(v: f64) -> f64 {
    if v < INFO_FLOOR {
        0.0
    } else {
        v
    }
}

/// An information quantity in bits.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct Bits(pub f64);

impl Bits {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Round-off around zero is mapped to an exact zero.
    pub fn clamped(self) -> Bits {
        Bits(snap_information(self.0))
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} bits", self.0)
    }
}

/// A named finite-alphabet random variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub size: usize,
}

impl Variable {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Variable {
            name: name.into(),
            size,
        }
    }
}

/// Entropy in bits of a (not necessarily normalized) probability vector.
pub fn entropy_of(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > ZERO_THRESHOLD)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Binary entropy function in bits.
pub fn binary_entropy(p: f64) -> f64 {
    entropy_of(&[p, 1.0 - p])
}

fn cell_count(sizes: impl IntoIterator<Item = usize>) -> u128 {
    sizes.into_iter().map(|s| s as u128).product()
}

fn check_limit(cells: u128, limit: usize) -> Result<()> {
    if cells > limit as u128 {
        return Err(Error::CellLimit { cells, limit });
    }
    Ok(())
}

fn to_variables<S: Into<String>>(vars: Vec<(S, usize)>) -> Result<Vec<Variable>> {
    let vars: Vec<Variable> = vars.into_iter().map(|(n, s)| Variable::new(n, s)).collect();
    for (i, v) in vars.iter().enumerate() {
        if v.size == 0 {
            return Err(Error::InvalidDistribution(format!(
                "variable `{}` has an empty alphabet",
                v.name
            )));
        }
        if vars[..i].iter().any(|w| w.name == v.name) {
            return Err(Error::InvalidDistribution(format!(
                "variable `{}` appears twice",
                v.name
            )));
        }
    }
    Ok(vars)
}

/// Checks nonnegativity and normalization, clamping round-off negatives to zero.
fn sanitize_vector(probs: &mut [f64], what: &str) -> Result<()> {
    let mut sum = 0.0;
    for p in probs.iter_mut() {
        if !p.is_finite() || *p < -1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "{what} has an invalid entry {p}"
            )));
        }
        if *p < 0.0 {
            *p = 0.0;
        }
        sum += *p;
    }
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidDistribution(format!(
            "{what} sums to {sum}, not 1"
        )));
    }
    Ok(())
}

/// Dense joint probability tensor over named variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    variables: Vec<Variable>,
    probabilities: Vec<f64>,
}

impl JointDistribution {
    pub fn new<S: Into<String>>(vars: Vec<(S, usize)>, probabilities: Vec<f64>) -> Result<Self> {
        Self::with_limit(vars, probabilities, DEFAULT_CELL_LIMIT)
    }

    pub fn with_limit<S: Into<String>>(
        vars: Vec<(S, usize)>,
        mut probabilities: Vec<f64>,
        limit: usize,
    ) -> Result<Self> {
        let variables = to_variables(vars)?;
        let cells = cell_count(variables.iter().map(|v| v.size));
        check_limit(cells, limit)?;
        if probabilities.len() as u128 != cells {
            return Err(Error::InvalidDistribution(format!(
                "expected {cells} cells, got {}",
                probabilities.len()
            )));
        }
        sanitize_vector(&mut probabilities, "joint distribution")?;
        Ok(JointDistribution {
            variables,
            probabilities,
        })
    }

    pub fn uniform<S: Into<String>>(vars: Vec<(S, usize)>) -> Result<Self> {
        let cells: usize = vars.iter().map(|(_, s)| *s).product();
        let p = if cells == 0 { 0.0 } else { 1.0 / cells as f64 };
        Self::new(vars, vec![p; cells])
    }

    /// All mass on the outcome tuple `outcome`.
    pub fn point_mass<S: Into<String>>(vars: Vec<(S, usize)>, outcome: &[usize]) -> Result<Self> {
        let variables = to_variables(vars)?;
        if outcome.len() != variables.len()
            || outcome.iter().zip(&variables).any(|(&o, v)| o >= v.size)
        {
            return Err(Error::InvalidArgument("outcome outside the alphabet".into()));
        }
        let cells: usize = variables.iter().map(|v| v.size).product();
        let mut probabilities = vec![0.0; cells];
        let flat = outcome
            .iter()
            .zip(&variables)
            .fold(0, |acc, (&o, v)| acc * v.size + o);
        probabilities[flat] = 1.0;
        Ok(JointDistribution {
            variables,
            probabilities,
        })
    }

    /// Joint of `input` (law `law`) and the outputs of `channel`.
    pub fn from_channel(law: &[f64], channel: &Channel) -> Result<Self> {
        if law.len() != channel.input_size() {
            return Err(Error::Composition(format!(
                "input law has {} entries, channel input `{}` has {}",
                law.len(),
                channel.input.name,
                channel.input_size()
            )));
        }
        let mut vars = vec![(channel.input.name.clone(), channel.input.size)];
        vars.extend(channel.outputs.iter().map(|v| (v.name.clone(), v.size)));
        let cols = channel.output_cells();
        let mut probs = Vec::with_capacity(law.len() * cols);
        for (x, &px) in law.iter().enumerate() {
            probs.extend(channel.row(x).iter().map(|&q| px * q));
        }
        Self::new(vars, probs)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn size_of(&self, name: &str) -> Result<usize> {
        Ok(self.variables[self.position(name)?].size)
    }

    /// Probability of a full outcome tuple.
    pub fn prob(&self, outcome: &[usize]) -> f64 {
        let flat = outcome
            .iter()
            .zip(&self.variables)
            .fold(0, |acc, (&o, v)| acc * v.size + o);
        self.probabilities[flat]
    }

    fn positions(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut idx = Vec::with_capacity(names.len());
        for name in names {
            let k = self.position(name)?;
            if idx.contains(&k) {
                return Err(Error::InvalidArgument(format!(
                    "variable `{name}` listed twice"
                )));
            }
            idx.push(k);
        }
        Ok(idx)
    }

    /// Marginal cell probabilities over the variables at positions `idx`, in that order.
    fn marginal_cells(&self, idx: &[usize]) -> Vec<f64> {
        let n = self.variables.len();
        let sizes: Vec<usize> = self.variables.iter().map(|v| v.size).collect();
        let mut stride = vec![0usize; n];
        let mut cells = 1usize;
        for &k in idx.iter().rev() {
            stride[k] = cells;
            cells *= sizes[k];
        }
        let mut out = vec![0.0; cells];
        let mut digits = vec![0usize; n];
        let mut target = 0usize;
        for &p in &self.probabilities {
            out[target] += p;
            for k in (0..n).rev() {
                digits[k] += 1;
                target += stride[k];
                if digits[k] < sizes[k] {
                    break;
                }
                target -= stride[k] * sizes[k];
                digits[k] = 0;
            }
        }
        out
    }

    /// Marginal over `names`, with variables in the listed order.
    pub fn marginal(&self, names: &[&str]) -> Result<JointDistribution> {
        let idx = self.positions(names)?;
        let probabilities = self.marginal_cells(&idx);
        Ok(JointDistribution {
            variables: idx.iter().map(|&k| self.variables[k].clone()).collect(),
            probabilities,
        })
    }

    pub fn entropy(&self, names: &[&str]) -> Result<Bits> {
        let idx = self.positions(names)?;
        Ok(Bits(entropy_of(&self.marginal_cells(&idx))))
    }

    /// `H(A|C)`.
    pub fn conditional_entropy(&self, a: &[&str], c: &[&str]) -> Result<Bits> {
        ensure_disjoint(&[a, c])?;
        let ac: Vec<&str> = a.iter().chain(c).copied().collect();
        Ok(Bits(
            (self.entropy(&ac)?.0 - self.entropy(c)?.0).max(0.0),
        ))
    }

    /// `I(A;B)`, clamped at zero.
    pub fn mutual_information(&self, a: &[&str], b: &[&str]) -> Result<Bits> {
        self.conditional_mutual_information(a, b, &[])
    }

    /// `I(A;B|C) = H(A,C) + H(B,C) - H(C) - H(A,B,C)`, clamped at zero.
    pub fn conditional_mutual_information(
        &self,
        a: &[&str],
        b: &[&str],
        c: &[&str],
    ) -> Result<Bits> {
        ensure_disjoint(&[a, b, c])?;
        let ac: Vec<&str> = a.iter().chain(c).copied().collect();
        let bc: Vec<&str> = b.iter().chain(c).copied().collect();
        let abc: Vec<&str> = a.iter().chain(b).chain(c).copied().collect();
        let value = self.entropy(&ac)?.0 + self.entropy(&bc)?.0
            - self.entropy(c)?.0
            - self.entropy(&abc)?.0;
        Ok(Bits(value).clamped())
    }

    /// The conditional law of `target` given `given` as a channel.
    ///
    /// Rows of zero-probability inputs are set to the uniform law.
    pub fn conditional(&self, given: &str, target: &[&str]) -> Result<Channel> {
        ensure_disjoint(&[&[given], target])?;
        let mut names = vec![given];
        names.extend_from_slice(target);
        let joint = self.marginal(&names)?;
        let rows = joint.variables[0].size;
        let cols = joint.probabilities.len() / rows;
        let mut matrix = Vec::with_capacity(joint.probabilities.len());
        for chunk in joint.probabilities.chunks(cols) {
            let mass: f64 = chunk.iter().sum();
            if mass > ZERO_THRESHOLD {
                matrix.extend(chunk.iter().map(|p| p / mass));
            } else {
                matrix.extend(std::iter::repeat_n(1.0 / cols as f64, cols));
            }
        }
        Channel::from_flat(
            (given, rows),
            joint.variables[1..]
                .iter()
                .map(|v| (v.name.as_str(), v.size))
                .collect(),
            matrix,
        )
    }

    /// Symbols of `name` that carry positive probability.
    pub fn support(&self, name: &str) -> Result<Vec<usize>> {
        let law = self.marginal(&[name])?;
        Ok(law
            .probabilities
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > ZERO_THRESHOLD)
            .map(|(i, _)| i)
            .collect())
    }

    /// Independent product; `other`'s variables follow `self`'s.
    pub fn product(&self, other: &JointDistribution) -> Result<JointDistribution> {
        let mut vars: Vec<(String, usize)> = self
            .variables
            .iter()
            .map(|v| (v.name.clone(), v.size))
            .collect();
        vars.extend(other.variables.iter().map(|v| (v.name.clone(), v.size)));
        let mut probs = Vec::with_capacity(self.probabilities.len() * other.probabilities.len());
        for &p in &self.probabilities {
            probs.extend(other.probabilities.iter().map(|&q| p * q));
        }
        JointDistribution::new(vars, probs)
    }

    /// Renames variables according to `(from, to)` pairs.
    pub fn renamed(&self, pairs: &[(&str, &str)]) -> Result<JointDistribution> {
        let mut out = self.clone();
        for (from, to) in pairs {
            let k = self.position(from)?;
            out.variables[k].name = to.to_string();
        }
        to_variables(
            out.variables
                .iter()
                .map(|v| (v.name.clone(), v.size))
                .collect(),
        )?;
        Ok(out)
    }

    /// Largest absolute cell difference against a joint with the same layout.
    pub fn max_abs_diff(&self, other: &JointDistribution) -> Result<f64> {
        if self.variables != other.variables {
            return Err(Error::InvalidArgument("joint layouts differ".into()));
        }
        Ok(self
            .probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

fn ensure_disjoint(sets: &[&[&str]]) -> Result<()> {
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            if let Some(name) = a.iter().find(|n| b.contains(n)) {
                return Err(Error::InvalidArgument(format!(
                    "variable `{name}` appears in more than one argument set"
                )));
            }
        }
    }
    Ok(())
}

/// Row-stochastic kernel from one input variable to a tuple of outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    input: Variable,
    outputs: Vec<Variable>,
    /// `input.size` rows of `output_cells()` entries each.
    matrix: Vec<f64>,
}

impl Channel {
    pub fn new<S: Into<String>>(
        input: (S, usize),
        outputs: Vec<(S, usize)>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let matrix = rows.into_iter().flatten().collect();
        Self::from_flat(input, outputs, matrix)
    }

    pub fn from_flat<S: Into<String>>(
        input: (S, usize),
        outputs: Vec<(S, usize)>,
        mut matrix: Vec<f64>,
    ) -> Result<Self> {
        let input = Variable::new(input.0, input.1);
        let outputs = to_variables(outputs)?;
        if input.size == 0 {
            return Err(Error::InvalidDistribution("channel input alphabet is empty".into()));
        }
        if outputs.is_empty() {
            return Err(Error::InvalidDistribution("channel has no outputs".into()));
        }
        if outputs.iter().any(|o| o.name == input.name) {
            return Err(Error::InvalidDistribution(format!(
                "input `{}` also listed as an output",
                input.name
            )));
        }
        let cols: usize = outputs.iter().map(|v| v.size).product();
        if matrix.len() != input.size * cols {
            return Err(Error::InvalidDistribution(format!(
                "channel `{}` needs {} x {} entries, got {}",
                input.name,
                input.size,
                cols,
                matrix.len()
            )));
        }
        for (x, row) in matrix.chunks_mut(cols).enumerate() {
            sanitize_vector(row, &format!("row {x} of channel from `{}`", input.name))?;
        }
        Ok(Channel {
            input,
            outputs,
            matrix,
        })
    }

    pub fn identity(input: &str, output: &str, size: usize) -> Result<Self> {
        let mut m = vec![0.0; size * size];
        for i in 0..size {
            m[i * size + i] = 1.0;
        }
        Self::from_flat((input, size), vec![(output, size)], m)
    }

    /// Every input maps to `symbol`.
    pub fn constant(
        input: &str,
        input_size: usize,
        output: &str,
        output_size: usize,
        symbol: usize,
    ) -> Result<Self> {
        if symbol >= output_size {
            return Err(Error::InvalidArgument("constant symbol outside alphabet".into()));
        }
        let mut m = vec![0.0; input_size * output_size];
        for x in 0..input_size {
            m[x * output_size + symbol] = 1.0;
        }
        Self::from_flat((input, input_size), vec![(output, output_size)], m)
    }

    /// Deterministic channel `x -> map[x]`.
    pub fn deterministic(
        input: &str,
        output: &str,
        output_size: usize,
        map: &[usize],
    ) -> Result<Self> {
        let mut m = vec![0.0; map.len() * output_size];
        for (x, &y) in map.iter().enumerate() {
            if y >= output_size {
                return Err(Error::InvalidArgument("map symbol outside alphabet".into()));
            }
            m[x * output_size + y] = 1.0;
        }
        Self::from_flat((input, map.len()), vec![(output, output_size)], m)
    }

    pub fn input(&self) -> &Variable {
        &self.input
    }

    pub fn outputs(&self) -> &[Variable] {
        &self.outputs
    }

    pub fn input_size(&self) -> usize {
        self.input.size
    }

    /// Number of joint output tuples.
    pub fn output_cells(&self) -> usize {
        self.outputs.iter().map(|v| v.size).product()
    }

    pub fn row(&self, x: usize) -> &[f64] {
        let cols = self.output_cells();
        &self.matrix[x * cols..(x + 1) * cols]
    }

    pub fn entry(&self, x: usize, out: usize) -> f64 {
        self.matrix[x * self.output_cells() + out]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix
            .chunks(self.output_cells())
            .map(|r| r.to_vec())
            .collect()
    }

    /// `self` followed by `next`: `p(c|a) = sum_b p(b|a) p(c|b)`.
    pub fn compose(&self, next: &Channel) -> Result<Channel> {
        let mid = self.output_cells();
        if next.input_size() != mid {
            return Err(Error::Composition(format!(
                "channel from `{}` emits {} symbols but channel from `{}` expects {}",
                self.input.name,
                mid,
                next.input.name,
                next.input_size()
            )));
        }
        let cols = next.output_cells();
        let mut m = vec![0.0; self.input.size * cols];
        for a in 0..self.input.size {
            let out = &mut m[a * cols..(a + 1) * cols];
            for (b, &pb) in self.row(a).iter().enumerate() {
                if pb == 0.0 {
                    continue;
                }
                for (o, &pc) in out.iter_mut().zip(next.row(b)) {
                    *o += pb * pc;
                }
            }
        }
        Ok(Channel {
            input: self.input.clone(),
            outputs: next.outputs.clone(),
            matrix: m,
        })
    }

    /// Conditional law of a subset of the outputs.
    pub fn output_marginal(&self, names: &[&str]) -> Result<Channel> {
        let law = vec![1.0 / self.input.size as f64; self.input.size];
        let joint = JointDistribution::from_channel(&law, self)?;
        joint.conditional(&self.input.name, names)
    }

    /// Two independent channels used side by side; input index is `x1 * |X2| + x2`.
    pub fn parallel(&self, other: &Channel, input_name: &str) -> Result<Channel> {
        let mut outputs: Vec<(String, usize)> = self
            .outputs
            .iter()
            .map(|v| (v.name.clone(), v.size))
            .collect();
        outputs.extend(other.outputs.iter().map(|v| (v.name.clone(), v.size)));
        let mut m = Vec::new();
        for x1 in 0..self.input.size {
            for x2 in 0..other.input.size {
                for &p in self.row(x1) {
                    m.extend(other.row(x2).iter().map(|&q| p * q));
                }
            }
        }
        Channel::from_flat(
            (input_name.to_string(), self.input.size * other.input.size),
            outputs,
            m,
        )
    }

    /// Same kernel with new variable names.
    pub fn with_names(&self, input: &str, outputs: &[&str]) -> Result<Channel> {
        if outputs.len() != self.outputs.len() {
            return Err(Error::InvalidArgument("output name count mismatch".into()));
        }
        Channel::from_flat(
            (input, self.input.size),
            outputs
                .iter()
                .zip(&self.outputs)
                .map(|(n, v)| (*n, v.size))
                .collect(),
            self.matrix.clone(),
        )
    }

    /// Keeps only the listed input symbols, in order.
    pub fn restrict_inputs(&self, keep: &[usize]) -> Result<Channel> {
        if keep.is_empty() || keep.iter().any(|&x| x >= self.input.size) {
            return Err(Error::InvalidArgument("invalid input restriction".into()));
        }
        let matrix = keep.iter().flat_map(|&x| self.row(x).to_vec()).collect();
        Channel::from_flat(
            (self.input.name.clone(), keep.len()),
            self.outputs
                .iter()
                .map(|v| (v.name.clone(), v.size))
                .collect(),
            matrix,
        )
    }

    /// `Some(map)` when every row is a point mass (within 1e-12).
    pub fn as_deterministic(&self) -> Option<Vec<usize>> {
        (0..self.input.size)
            .map(|x| self.row(x).iter().position(|&p| (p - 1.0).abs() <= 1e-12))
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Channel) -> Result<f64> {
        if self.input.size != other.input.size || self.output_cells() != other.output_cells() {
            return Err(Error::InvalidArgument("channel shapes differ".into()));
        }
        Ok(self
            .matrix
            .iter()
            .zip(&other.matrix)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bsc_joint(eps: f64) -> JointDistribution {
        JointDistribution::new(
            vec![("X", 2), ("Y", 2)],
            vec![0.5 * (1.0 - eps), 0.5 * eps, 0.5 * eps, 0.5 * (1.0 - eps)],
        )
        .unwrap()
    }

    #[test]
    fn entropy_examples() {
        let u = JointDistribution::uniform(vec![("A", 4)]).unwrap();
        assert_abs_diff_eq!(u.entropy(&["A"]).unwrap().0, 2.0, epsilon = 1e-12);

        let point = JointDistribution::point_mass(vec![("A", 3), ("B", 2)], &[2, 1]).unwrap();
        assert_eq!(point.entropy(&["A", "B"]).unwrap().0, 0.0);

        let bern = JointDistribution::new(vec![("A", 2)], vec![0.8, 0.2]).unwrap();
        // -0.8 log2 0.8 - 0.2 log2 0.2
        assert_abs_diff_eq!(bern.entropy(&["A"]).unwrap().0, 0.721928, epsilon = 1e-6);
    }

    #[test]
    fn unknown_variable_is_named() {
        let u = JointDistribution::uniform(vec![("A", 2)]).unwrap();
        assert_eq!(
            u.entropy(&["Q"]).unwrap_err(),
            Error::UnknownVariable("Q".into())
        );
    }

    #[test]
    fn mutual_information_examples() {
        let indep = JointDistribution::uniform(vec![("A", 2), ("B", 3)]).unwrap();
        assert_abs_diff_eq!(indep.mutual_information(&["A"], &["B"]).unwrap().0, 0.0);

        let copy = bsc_joint(0.0);
        assert_abs_diff_eq!(
            copy.mutual_information(&["X"], &["Y"]).unwrap().0,
            1.0,
            epsilon = 1e-12
        );

        let bsc = bsc_joint(0.1);
        // 1 - h2(0.1) with h2(0.1) = 0.468996
        assert_abs_diff_eq!(
            bsc.mutual_information(&["X"], &["Y"]).unwrap().0,
            0.531004,
            epsilon = 1e-6
        );
    }

    #[test]
    fn overlapping_sets_rejected() {
        let j = bsc_joint(0.1);
        assert!(matches!(
            j.mutual_information(&["X"], &["X", "Y"]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            j.conditional_mutual_information(&["X"], &["Y"], &["Y"]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn conditional_mutual_information_examples() {
        // C constant reduces to I(A;B).
        let c = JointDistribution::point_mass(vec![("C", 1)], &[0]).unwrap();
        let j = bsc_joint(0.2).product(&c).unwrap();
        assert_abs_diff_eq!(
            j.conditional_mutual_information(&["X"], &["Y"], &["C"]).unwrap().0,
            j.mutual_information(&["X"], &["Y"]).unwrap().0,
            epsilon = 1e-12
        );

        // A = B = C uniform bit.
        let mut p = vec![0.0; 8];
        p[0] = 0.5;
        p[7] = 0.5;
        let abc = JointDistribution::new(vec![("A", 2), ("B", 2), ("C", 2)], p).unwrap();
        assert_abs_diff_eq!(
            abc.conditional_mutual_information(&["A"], &["B"], &["C"]).unwrap().0,
            0.0,
            epsilon = 1e-12
        );

        // Markov chain A - C - B.
        let a_to_c = Channel::new(("A", 2), vec![("C", 3)], vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3]]).unwrap();
        let c_to_b = Channel::new(
            ("C", 3),
            vec![("B", 2)],
            vec![vec![0.9, 0.1], vec![0.3, 0.7], vec![0.5, 0.5]],
        )
        .unwrap();
        let mut probs = Vec::new();
        for (a, pa) in [0.35, 0.65].iter().enumerate() {
            for cc in 0..3 {
                for b in 0..2 {
                    probs.push(pa * a_to_c.entry(a, cc) * c_to_b.entry(cc, b));
                }
            }
        }
        let chain = JointDistribution::new(vec![("A", 2), ("C", 3), ("B", 2)], probs).unwrap();
        assert!(
            chain
                .conditional_mutual_information(&["A"], &["B"], &["C"])
                .unwrap()
                .0
                < 1e-9
        );
    }

    #[test]
    fn invalid_joints_rejected() {
        assert!(JointDistribution::new(vec![("A", 2)], vec![0.7, 0.7]).is_err());
        assert!(JointDistribution::new(vec![("A", 2)], vec![1.2, -0.2]).is_err());
        assert!(JointDistribution::new(vec![("A", 2), ("A", 1)], vec![0.5, 0.5]).is_err());
        assert!(JointDistribution::new(vec![("A", 0)], vec![]).is_err());
        assert!(matches!(
            JointDistribution::with_limit(vec![("A", 4), ("B", 4)], vec![1.0 / 16.0; 16], 10),
            Err(Error::CellLimit { cells: 16, limit: 10 })
        ));
    }

    #[test]
    fn channel_composition_and_marginals() {
        let bsc1 = Channel::new(("X", 2), vec![("Y", 2)], vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let bsc2 = Channel::new(("Y", 2), vec![("Z", 2)], vec![vec![0.8, 0.2], vec![0.2, 0.8]]).unwrap();
        let composed = bsc1.compose(&bsc2).unwrap();
        assert_abs_diff_eq!(composed.entry(0, 1), 0.9 * 0.2 + 0.1 * 0.8, epsilon = 1e-15);
        assert_eq!(composed.outputs()[0].name, "Z");

        let wide = Channel::new(("X", 3), vec![("Y", 2)], vec![vec![1.0, 0.0]; 3]).unwrap();
        assert!(matches!(wide.compose(&wide), Err(Error::Composition(_))));

        let both = bsc1.parallel(&bsc2.with_names("X2", &["Z"]).unwrap(), "XX").unwrap();
        assert_eq!(both.input_size(), 4);
        let y_only = both.output_marginal(&["Y"]).unwrap();
        assert_abs_diff_eq!(y_only.entry(3, 1), 0.9, epsilon = 1e-12);
    }

    #[test]
    fn conditional_channel_recovers_kernel() {
        let j = bsc_joint(0.3);
        let ch = j.conditional("X", &["Y"]).unwrap();
        assert_abs_diff_eq!(ch.entry(0, 1), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(ch.entry(1, 1), 0.7, epsilon = 1e-12);
    }

    fn random_joint(sizes: &[usize], weights: &[f64]) -> JointDistribution {
        let cells: usize = sizes.iter().product();
        let w: Vec<f64> = weights.iter().cycle().take(cells).copied().collect();
        let total: f64 = w.iter().sum();
        let names = ["A", "B", "C", "D"];
        JointDistribution::new(
            sizes.iter().enumerate().map(|(i, &s)| (names[i], s)).collect(),
            w.iter().map(|x| x / total).collect(),
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn chain_rule(
            sizes in prop::collection::vec(1usize..4, 3),
            weights in prop::collection::vec(0.001f64..1.0, 27),
        ) {
            let j = random_joint(&sizes, &weights);
            let lhs = j.mutual_information(&["A"], &["B", "C"]).unwrap().0;
            let rhs = j.mutual_information(&["A"], &["B"]).unwrap().0
                + j.conditional_mutual_information(&["A"], &["C"], &["B"]).unwrap().0;
            prop_assert!((lhs - rhs).abs() <= 1e-9);
        }

        #[test]
        fn marginalization_order_independent(
            sizes in prop::collection::vec(1usize..4, 4),
            weights in prop::collection::vec(0.001f64..1.0, 81),
        ) {
            let j = random_joint(&sizes, &weights);
            let direct = j.marginal(&["B", "D"]).unwrap();
            let via_a = j.marginal(&["B", "C", "D"]).unwrap().marginal(&["B", "D"]).unwrap();
            let via_c = j.marginal(&["A", "B", "D"]).unwrap().marginal(&["B", "D"]).unwrap();
            prop_assert!(direct.max_abs_diff(&via_a).unwrap() <= 1e-12);
            prop_assert!(direct.max_abs_diff(&via_c).unwrap() <= 1e-12);
        }
    }
}
