use std::cmp::Ordering;
use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use bcq_core::numerics::{compare_rational_vs_enclosed, exp_neg_enclosure, pow, rat, NumericsError};
use bcq_core::theorems::{self, Side};
use bcq_core::{Certificate, DivergenceRate, EventModel, Rational, TheoremTag, Verdict};
use num_traits::One;

use crate::config::RunConfig;

pub type Point = BTreeMap<String, u64>;

/// A sweepable quantity: a theorem, or the tightness power `(1 - 1/k)^{kN}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Theorem(TheoremTag),
    DiePower,
}

impl Quantity {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "die-power" | "power" => Ok(Self::DiePower),
            _ => s.parse().map(Self::Theorem).map_err(anyhow::Error::msg),
        }
    }
}

/// One evaluated grid point, ready for JSON or CSV.
#[derive(Debug, Clone)]
pub struct Row {
    pub point: Point,
    pub lhs: Side,
    pub rhs: Side,
    pub margin: Rational,
    pub verdict: Verdict,
}

impl From<(Point, &Certificate)> for Row {
    fn from((point, c): (Point, &Certificate)) -> Self {
        Row { point, lhs: c.lhs.clone(), rhs: c.rhs.clone(), margin: c.margin.clone(), verdict: c.verdict }
    }
}

/// The integer axes a quantity is evaluated over, with defaults where one exists.
pub fn axes(q: Quantity, cfg: &RunConfig) -> Vec<(&'static str, Option<u64>)> {
    use TheoremTag::*;
    let q = match q {
        Quantity::DiePower => return vec![("k", None), ("N", Some(1))],
        Quantity::Theorem(t) => t,
    };
    match q {
        FirstBc => vec![("l", None), ("m", None)],
        SecondBc => vec![("n", None), ("N", None)],
        ErdosRenyi => vec![("n", None), ("l", None)],
        ChungErdos | RatioLowerBound | YanRatios | WnLimit => vec![("n", None)],
        KsTailEstimate if cfg.params.contains_key("j") => vec![("m", None), ("l", None), ("j", None)],
        KsTailEstimate | KochenStoneMeta => vec![("m", None), ("l", None)],
        SpeckerReduction => vec![("l", None)],
        KsAlgebra => vec![],
        BkTail => vec![("k", Some(1)), ("n", None)],
    }
}

/// Shared, validated inputs for a batch of grid points.
pub struct Evaluator<'a> {
    cfg: &'a RunConfig,
    budget: u32,
    omega: Option<DivergenceRate>,
    tolerance: Rational,
}

impl<'a> Evaluator<'a> {
    pub fn new(cfg: &'a RunConfig, q: Quantity) -> Result<Self> {
        use TheoremTag::*;
        let budget = cfg.precision_budget()?;
        let needs_omega = matches!(q, Quantity::Theorem(SecondBc | ErdosRenyi | KsTailEstimate | KochenStoneMeta));
        let omega = if needs_omega { Some(cfg.omega()?) } else { None };
        match q {
            Quantity::Theorem(FirstBc) => {
                cfg.convergence_rate()?;
            }
            Quantity::Theorem(ErdosRenyi) => {
                cfg.liminf_witness()?;
            }
            Quantity::Theorem(KochenStoneMeta) => {
                cfg.g()?;
            }
            Quantity::Theorem(SpeckerReduction) => {
                cfg.specker()?;
            }
            Quantity::Theorem(KsAlgebra) | Quantity::DiePower => {}
            Quantity::Theorem(_) => {
                cfg.model()?;
            }
        }
        let tolerance = cfg.rational("tolerance")?.unwrap_or_else(|| rat(1, 50));
        Ok(Self { cfg, budget, omega, tolerance })
    }

    fn omega(&self) -> &DivergenceRate {
        self.omega.as_ref().expect("loaded for theorems that need it")
    }

    pub fn evaluate(&self, q: Quantity, p: &Point) -> Result<(Row, Option<Certificate>)> {
        match q {
            Quantity::DiePower => Ok((self.die_power(p)?, None)),
            Quantity::Theorem(t) => {
                let c = self.certificate(t, p)?;
                Ok(((p.clone(), &c).into(), Some(c)))
            }
        }
    }

    pub fn certificate(&self, tag: TheoremTag, p: &Point) -> Result<Certificate> {
        use TheoremTag::*;
        let cfg = self.cfg;
        let c = match tag {
            FirstBc => theorems::first_bc(cfg.model()?, &cfg.convergence_rate()?, small(p, "l")?, p["m"])?,
            SecondBc => {
                let EventModel::IndependentBernoulli(ind) = cfg.model()? else {
                    bail!("second_bc needs an independent model");
                };
                theorems::second_bc(ind, self.omega(), p["n"], small(p, "N")?, self.budget)?
            }
            ErdosRenyi => {
                theorems::erdos_renyi(cfg.model()?, self.omega(), &cfg.liminf_witness()?, p["n"], small(p, "l")?)?
            }
            ChungErdos => theorems::chung_erdos(cfg.model()?, p["n"])?,
            RatioLowerBound => theorems::ratio_lower_bound(cfg.model()?, p["n"])?,
            KsTailEstimate => {
                let (model, m, l) = (cfg.model()?, p["m"], small(p, "l")?);
                let j = match p.get("j") {
                    Some(&j) => j,
                    None => theorems::ks_tail_threshold(model, self.omega(), m, l)? + 1,
                };
                theorems::ks_tail_estimate(model, self.omega(), m, l, j)?
            }
            KochenStoneMeta => {
                theorems::kochen_stone_meta(cfg.model()?, self.omega(), p["m"], small(p, "l")?, cfg.g()?)?.0
            }
            YanRatios => theorems::yan_certificate(cfg.model()?, p["n"], &self.tolerance)?,
            WnLimit => {
                let EventModel::NestedIntervals(nested) = cfg.model()? else {
                    bail!("wn_limit needs a nested model");
                };
                theorems::wn_certificate(nested, p["n"], &self.tolerance)?
            }
            SpeckerReduction => theorems::specker_certificate(cfg.specker()?, small(p, "l")?)?,
            KsAlgebra => theorems::ks_algebra_check(
                &cfg.required_rational("a")?,
                &cfg.required_rational("b")?,
                &cfg.required_rational("alpha")?,
                &cfg.required_rational("beta")?,
                &cfg.required_rational("epsilon")?,
            )?,
            BkTail => theorems::bk_tail_check(cfg.model()?, small(p, "k")?, p["n"])?,
        };
        Ok(c)
    }

    /// `(1 - 1/k)^{kN} <= e^{-N}`, decided against enclosures of `e^{-N}`.
    fn die_power(&self, p: &Point) -> Result<Row> {
        let (k, n) = (p["k"], small(p, "N")?);
        if k == 0 {
            bail!("k starts at 1");
        }
        let exponent = k.checked_mul(u64::from(n)).context("k·N overflows")?;
        let base = Rational::one() - Rational::new(1.into(), k.into());
        let lhs = pow(&base, exponent);
        let target = |prec: u32| exp_neg_enclosure(n, prec);
        let (verdict, enc, margin) = match compare_rational_vs_enclosed(&lhs, target, self.budget) {
            Ok((Ordering::Less, enc)) => {
                let m = enc.lo() - &lhs;
                (Verdict::Pass, enc, m)
            }
            Ok((_, enc)) => {
                let m = enc.hi() - &lhs;
                (Verdict::Fail, enc, m)
            }
            Err(NumericsError::Undecided { .. }) => {
                let enc = exp_neg_enclosure(n, self.budget);
                let m = enc.lo() - &lhs;
                (Verdict::Undecided, enc, m)
            }
            Err(e) => return Err(e.into()),
        };
        Ok(Row { point: p.clone(), lhs: Side::Exact(lhs), rhs: Side::Enclosed(enc), margin, verdict })
    }
}

fn small(p: &Point, name: &str) -> Result<u32> {
    u32::try_from(p[name]).with_context(|| format!("{name} = {} is too large", p[name]))
}
