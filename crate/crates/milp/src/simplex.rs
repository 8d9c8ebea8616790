//! Bounded-variable primal simplex over exact rationals.
//!
//! Two phases on a dense tableau. Pricing is Dantzig's largest reduced
//! cost; after a run of degenerate pivots the solver switches to Bland's
//! smallest-index rule until the objective moves again, which rules out
//! cycling.

use crate::model::{Bounds, MilpModel, Relation, Sense};
use crate::rational::Rational;

const DEGENERATE_STREAK_FOR_BLAND: usize = 16;
const PIVOT_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { objective: Rational, values: Vec<Rational> },
    Infeasible,
    Unbounded,
    /// Safety valve; never hit with Bland's rule in force.
    PivotLimit,
}

#[derive(Debug, Clone)]
enum VarMap {
    Fixed(Rational),
    /// value = offset + sign * column
    Column { col: usize, sign: i8, offset: Rational },
    /// value = pos - neg
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    upper: Vec<Option<Rational>>,
    at_upper: Vec<bool>,
    is_basic: Vec<bool>,
    reduced: Vec<Rational>,
    pivots: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Continue,
}

impl Tableau {
    fn ncols(&self) -> usize {
        self.upper.len()
    }

    fn pivot(&mut self, r: usize, q: usize) {
        self.pivots += 1;
        let piv = self.rows[r][q].clone();
        if piv != Rational::ONE {
            let inv = piv.recip();
            for v in self.rows[r].iter_mut() {
                if !v.is_zero() {
                    *v = &*v * &inv;
                }
            }
        }
        let nz: Vec<usize> = (0..self.ncols()).filter(|&k| !self.rows[r][k].is_zero()).collect();
        let prow: Vec<Rational> = nz.iter().map(|&k| self.rows[r][k].clone()).collect();
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][q].clone();
            if f.is_zero() {
                continue;
            }
            let row = &mut self.rows[i];
            for (idx, &k) in nz.iter().enumerate() {
                row[k].sub_mul_assign(&f, &prow[idx]);
            }
        }
        let f = self.reduced[q].clone();
        if !f.is_zero() {
            for (idx, &k) in nz.iter().enumerate() {
                self.reduced[k].sub_mul_assign(&f, &prow[idx]);
            }
        }
        let leaving = self.basis[r];
        self.is_basic[leaving] = false;
        self.is_basic[q] = true;
        self.at_upper[q] = false;
        self.basis[r] = q;
    }

    fn set_costs(&mut self, costs: &[Rational]) {
        let mut d = costs.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = &costs[b];
            if cb.is_zero() {
                continue;
            }
            for (k, v) in self.rows[i].iter().enumerate() {
                if !v.is_zero() {
                    d[k].sub_mul_assign(cb, v);
                }
            }
        }
        self.reduced = d;
    }

    fn choose_entering(&self, bland: bool, banned: usize) -> Option<(usize, bool)> {
        let mut best: Option<(usize, bool)> = None;
        let mut best_mag = Rational::ZERO;
        for j in 0..banned {
            if self.is_basic[j] {
                continue;
            }
            let d = &self.reduced[j];
            let increase = if self.at_upper[j] {
                if !d.is_positive() {
                    continue;
                }
                false
            } else {
                if !d.is_negative() {
                    continue;
                }
                if matches!(&self.upper[j], Some(u) if u.is_zero()) {
                    continue;
                }
                true
            };
            if bland {
                return Some((j, increase));
            }
            let mag = d.abs();
            if best.is_none() || mag > best_mag {
                best_mag = mag;
                best = Some((j, increase));
            }
        }
        best
    }

    fn step(&mut self, bland: &mut bool, streak: &mut usize, banned: usize) -> Step {
        let Some((q, increase)) = self.choose_entering(*bland, banned) else {
            return Step::Optimal;
        };
        // Moving x_q by +theta (increase) or -theta changes x_B by -alpha*theta.
        let mut limit: Option<(Rational, Option<usize>)> =
            self.upper[q].as_ref().map(|u| (u.clone(), None));
        for i in 0..self.rows.len() {
            let t = &self.rows[i][q];
            if t.is_zero() {
                continue;
            }
            let alpha = if increase { t.clone() } else { -t };
            let ratio = if alpha.is_positive() {
                &self.rhs[i] / &alpha
            } else {
                match &self.upper[self.basis[i]] {
                    Some(u) => &(u - &self.rhs[i]) / &(-&alpha),
                    None => continue,
                }
            };
            let better = match &limit {
                None => true,
                Some((best, who)) => {
                    ratio < *best
                        || (ratio == *best
                            && matches!(who, Some(r) if self.basis[i] < self.basis[*r]))
                }
            };
            if better {
                limit = Some((ratio, Some(i)));
            }
        }
        let Some((theta, leave_row)) = limit else {
            return Step::Unbounded;
        };
        if theta.is_zero() {
            *streak += 1;
            if *streak > DEGENERATE_STREAK_FOR_BLAND {
                *bland = true;
            }
        } else {
            *streak = 0;
            *bland = false;
        }
        if !theta.is_zero() {
            for i in 0..self.rows.len() {
                let t = &self.rows[i][q];
                if t.is_zero() {
                    continue;
                }
                let delta = &theta * t;
                if increase {
                    self.rhs[i] -= &delta;
                } else {
                    self.rhs[i] += &delta;
                }
            }
        }
        match leave_row {
            None => {
                self.at_upper[q] = !self.at_upper[q];
            }
            Some(r) => {
                let leaving = self.basis[r];
                let t = &self.rows[r][q];
                let alpha_pos = if increase { t.is_positive() } else { t.is_negative() };
                let entering_value = if increase {
                    theta.clone()
                } else {
                    self.upper[q].as_ref().expect("at upper implies finite upper") - &theta
                };
                self.pivot(r, q);
                self.rhs[r] = entering_value;
                self.at_upper[leaving] = !alpha_pos;
            }
        }
        Step::Continue
    }

    fn run(&mut self, banned: usize) -> Option<Step> {
        let mut bland = false;
        let mut streak = 0;
        loop {
            if self.pivots > PIVOT_LIMIT {
                return None;
            }
            match self.step(&mut bland, &mut streak, banned) {
                Step::Continue => {}
                other => return Some(other),
            }
        }
    }

    fn column_value(&self, j: usize, row_of: &[Option<usize>]) -> Rational {
        match row_of[j] {
            Some(r) => self.rhs[r].clone(),
            None if self.at_upper[j] => self.upper[j].clone().unwrap_or(Rational::ZERO),
            None => Rational::ZERO,
        }
    }
}

/// Solves the LP relaxation of `model` with every variable's bounds taken
/// from `bounds` (one entry per model variable). Integrality is ignored.
pub fn solve_relaxation(model: &MilpModel, bounds: &[Bounds]) -> LpOutcome {
    let nvars = model.variables().len();
    debug_assert_eq!(bounds.len(), nvars);

    let mut maps = Vec::with_capacity(nvars);
    let mut upper: Vec<Option<Rational>> = Vec::new();
    for b in bounds {
        let m = match (&b.lower, &b.upper) {
            (Some(l), Some(u)) if l == u => VarMap::Fixed(l.clone()),
            (Some(l), Some(u)) if l > u => return LpOutcome::Infeasible,
            (Some(l), u) => {
                upper.push(u.as_ref().map(|u| u - l));
                VarMap::Column { col: upper.len() - 1, sign: 1, offset: l.clone() }
            }
            (None, Some(u)) => {
                upper.push(None);
                VarMap::Column { col: upper.len() - 1, sign: -1, offset: u.clone() }
            }
            (None, None) => {
                upper.push(None);
                upper.push(None);
                VarMap::Split { pos: upper.len() - 2, neg: upper.len() - 1 }
            }
        };
        maps.push(m);
    }
    let nstruct = upper.len();

    // Row data in structural columns; slacks are appended below.
    let mut row_terms: Vec<Vec<(usize, Rational)>> = Vec::new();
    let mut row_rhs: Vec<Rational> = Vec::new();
    let mut row_rel: Vec<Relation> = Vec::new();
    for c in model.constraints() {
        let mut rhs = c.rhs.clone();
        let mut terms: Vec<(usize, Rational)> = Vec::new();
        for (v, a) in c.expr.terms() {
            match &maps[v.0] {
                VarMap::Fixed(x) => rhs -= &(a * x),
                VarMap::Column { col, sign, offset } => {
                    rhs -= &(a * offset);
                    terms.push((*col, if *sign > 0 { a.clone() } else { -a }));
                }
                VarMap::Split { pos, neg } => {
                    terms.push((*pos, a.clone()));
                    terms.push((*neg, -a));
                }
            }
        }
        if terms.is_empty() {
            let ok = match c.relation {
                Relation::Le => Rational::ZERO <= rhs,
                Relation::Eq => rhs.is_zero(),
                Relation::Ge => Rational::ZERO >= rhs,
            };
            if !ok {
                return LpOutcome::Infeasible;
            }
            continue;
        }
        row_terms.push(terms);
        row_rhs.push(rhs);
        row_rel.push(c.relation);
    }

    let m = row_terms.len();
    let nslack = row_rel.iter().filter(|r| **r != Relation::Eq).count();
    let ncols_no_art = nstruct + nslack;
    let mut slack_of = vec![None; m];
    let mut next = nstruct;
    for (i, rel) in row_rel.iter().enumerate() {
        if *rel != Relation::Eq {
            slack_of[i] = Some(next);
            next += 1;
        }
    }
    for _ in 0..nslack {
        upper.push(None);
    }

    // Decide which rows need an artificial column.
    let mut negate = vec![false; m];
    let mut needs_art = vec![false; m];
    for i in 0..m {
        negate[i] = row_rhs[i].is_negative();
        let slack_sign_positive = match row_rel[i] {
            Relation::Le => !negate[i],
            Relation::Ge => negate[i],
            Relation::Eq => false,
        };
        needs_art[i] = !(slack_of[i].is_some() && slack_sign_positive);
    }
    let nart = needs_art.iter().filter(|x| **x).count();
    let ncols = ncols_no_art + nart;
    for _ in 0..nart {
        upper.push(None);
    }

    let mut rows = vec![vec![Rational::ZERO; ncols]; m];
    let mut rhs = vec![Rational::ZERO; m];
    let mut basis = vec![0usize; m];
    let mut art_col = ncols_no_art;
    for i in 0..m {
        let sgn = if negate[i] { -Rational::ONE } else { Rational::ONE };
        for (c, a) in &row_terms[i] {
            rows[i][*c] += &(a * &sgn);
        }
        if let Some(s) = slack_of[i] {
            let base = if row_rel[i] == Relation::Le { Rational::ONE } else { -Rational::ONE };
            rows[i][s] = &base * &sgn;
        }
        rhs[i] = &row_rhs[i] * &sgn;
        if needs_art[i] {
            rows[i][art_col] = Rational::ONE;
            basis[i] = art_col;
            art_col += 1;
        } else {
            basis[i] = slack_of[i].unwrap();
        }
    }
    let mut is_basic = vec![false; ncols];
    for &b in &basis {
        is_basic[b] = true;
    }
    let mut tab = Tableau {
        rows,
        rhs,
        basis,
        upper,
        at_upper: vec![false; ncols],
        is_basic,
        reduced: Vec::new(),
        pivots: 0,
    };

    if nart > 0 {
        let mut costs = vec![Rational::ZERO; ncols];
        for c in costs.iter_mut().skip(ncols_no_art) {
            *c = Rational::ONE;
        }
        tab.set_costs(&costs);
        match tab.run(ncols) {
            None => return LpOutcome::PivotLimit,
            Some(Step::Unbounded) => unreachable!("phase one is bounded below by zero"),
            Some(_) => {}
        }
        let infeas: Rational = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, b)| **b >= ncols_no_art)
            .map(|(i, _)| tab.rhs[i].clone())
            .sum();
        if infeas.is_positive() {
            return LpOutcome::Infeasible;
        }
        // Drive remaining (zero-valued) artificials out of the basis.
        let mut i = 0;
        while i < tab.rows.len() {
            if tab.basis[i] >= ncols_no_art {
                let col = (0..ncols_no_art).find(|&j| !tab.is_basic[j] && !tab.rows[i][j].is_zero());
                match col {
                    Some(j) => {
                        let value = if tab.at_upper[j] {
                            tab.upper[j].clone().unwrap_or(Rational::ZERO)
                        } else {
                            Rational::ZERO
                        };
                        let leaving = tab.basis[i];
                        tab.pivot(i, j);
                        tab.rhs[i] = value;
                        tab.at_upper[leaving] = false;
                    }
                    None => {
                        // Redundant row.
                        let b = tab.basis[i];
                        tab.is_basic[b] = false;
                        tab.rows.swap_remove(i);
                        tab.rhs.swap_remove(i);
                        tab.basis.swap_remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        for row in tab.rows.iter_mut() {
            row.truncate(ncols_no_art);
        }
        tab.upper.truncate(ncols_no_art);
        tab.at_upper.truncate(ncols_no_art);
        tab.is_basic.truncate(ncols_no_art);
    }

    // Phase two: minimize (sign-adjusted) objective over structural columns.
    let flip = model.objective().sense == Sense::Maximize;
    let mut costs = vec![Rational::ZERO; ncols_no_art];
    for (v, a) in model.objective().expr.terms() {
        let a = if flip { -a } else { a.clone() };
        match &maps[v.0] {
            VarMap::Fixed(_) => {}
            VarMap::Column { col, sign, .. } => {
                costs[*col] += &(if *sign > 0 { a } else { -a });
            }
            VarMap::Split { pos, neg } => {
                costs[*pos] += &a;
                costs[*neg] -= &a;
            }
        }
    }
    tab.set_costs(&costs);
    match tab.run(ncols_no_art) {
        None => return LpOutcome::PivotLimit,
        Some(Step::Unbounded) => return LpOutcome::Unbounded,
        Some(_) => {}
    }

    let mut row_of = vec![None; ncols_no_art];
    for (i, &b) in tab.basis.iter().enumerate() {
        row_of[b] = Some(i);
    }
    let values: Vec<Rational> = maps
        .iter()
        .map(|m| match m {
            VarMap::Fixed(x) => x.clone(),
            VarMap::Column { col, sign, offset } => {
                let c = tab.column_value(*col, &row_of);
                if *sign > 0 {
                    offset + &c
                } else {
                    offset - &c
                }
            }
            VarMap::Split { pos, neg } => tab.column_value(*pos, &row_of) - tab.column_value(*neg, &row_of),
        })
        .collect();
    let objective = model.objective().expr.evaluate(&values);
    LpOutcome::Optimal { objective, values }
}
