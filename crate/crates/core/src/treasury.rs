//! Fiscal gatekeeping.
//!
//! Approval is a pure check against the ledger; it never writes an entry.
//! Each inequality passes on equality and fails only on strict violation.

use std::fmt;

use num_rational::Ratio;
use serde::Serialize;

use crate::charter::FiscalBoundaries;
use crate::ledger::Ledger;
use crate::money::{ratio_to_string, Cents};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FiscalCheck {
    Balance,
    DailyCap,
    Profitability,
    BudgetCeiling,
}

impl fmt::Display for FiscalCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FiscalCheck::Balance => "BALANCE",
            FiscalCheck::DailyCap => "DAILY_CAP",
            FiscalCheck::Profitability => "PROFITABILITY",
            FiscalCheck::BudgetCeiling => "BUDGET_CEILING",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FiscalDecision {
    pub approved: bool,
    pub task_id: String,
    pub cost_usd_cents: i64,
    pub reason: String,
    pub check_failed: Option<FiscalCheck>,
}

impl FiscalDecision {
    fn approved(task_id: &str, cost: Cents, reason: String) -> Self {
        FiscalDecision {
            approved: true,
            task_id: task_id.to_string(),
            cost_usd_cents: cost.get(),
            reason,
            check_failed: None,
        }
    }
}

/// Raised when a cost would break the balance, daily cap or budget ceiling.
///
/// `attempted` is the left-hand side of the violated inequality (for the
/// balance check, the post-spend balance) and `limit` is the bound it broke.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("{message}")]
pub struct FiscalInsolvencyError {
    pub check: FiscalCheck,
    pub task_id: String,
    pub cost_usd_cents: i64,
    pub attempted_usd_cents: i64,
    pub limit_usd_cents: i64,
    pub message: String,
}

impl FiscalInsolvencyError {
    pub fn decision(&self) -> FiscalDecision {
        FiscalDecision {
            approved: false,
            task_id: self.task_id.clone(),
            cost_usd_cents: self.cost_usd_cents,
            reason: self.message.clone(),
            check_failed: Some(self.check),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("{message}")]
pub struct UnprofitableJobError {
    pub revenue_usd_cents: i64,
    pub cost_usd_cents: i64,
    pub max_allowed_cost_usd_cents: i64,
    /// Margin floor rendered as a decimal, e.g. `"0.35"`.
    pub margin_floor: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NegotiatedBudget {
    pub original_bid_cost_usd_cents: i64,
    pub runway_usd_cents: i64,
    pub max_tokens: u64,
}

pub const MIN_NEGOTIATED_TOKENS: u64 = 256;

#[derive(Debug, Clone)]
pub struct Treasury {
    bounds: FiscalBoundaries,
}

impl Treasury {
    pub fn new(bounds: FiscalBoundaries) -> Self {
        Treasury { bounds }
    }

    pub fn bounds(&self) -> &FiscalBoundaries {
        &self.bounds
    }

    /// Balance/reserve, daily burn cap and lifetime budget ceiling, in that order.
    pub fn approve_task(
        &self,
        ledger: &Ledger,
        cost: Cents,
        task_id: &str,
        purpose: &str,
    ) -> Result<FiscalDecision, FiscalInsolvencyError> {
        assert!(cost >= Cents::ZERO, "task cost must be non-negative");
        let fail = |check, attempted: Cents, limit: Cents, message: String| FiscalInsolvencyError {
            check,
            task_id: task_id.to_string(),
            cost_usd_cents: cost.get(),
            attempted_usd_cents: attempted.get(),
            limit_usd_cents: limit.get(),
            message,
        };

        let balance = ledger.total_usd_cents();
        let reserve = self.bounds.min_reserve;
        if balance - cost < reserve {
            return Err(fail(
                FiscalCheck::Balance,
                balance - cost,
                reserve,
                format!("Insufficient funds: {balance} - {cost} < reserve {reserve}"),
            ));
        }

        let daily = ledger.daily_debits();
        let cap = self.bounds.daily_burn_max;
        if daily + cost > cap {
            return Err(fail(
                FiscalCheck::DailyCap,
                daily + cost,
                cap,
                format!("Daily burn cap exceeded: {} > {cap} cap", daily + cost),
            ));
        }

        let lifetime = ledger.lifetime_usd_debits();
        let ceiling = self.bounds.max_budget;
        if lifetime + cost > ceiling {
            return Err(fail(
                FiscalCheck::BudgetCeiling,
                lifetime + cost,
                ceiling,
                format!("Budget ceiling exceeded: {} > {ceiling} ceiling", lifetime + cost),
            ));
        }

        Ok(FiscalDecision::approved(
            task_id,
            cost,
            format!("Approved {cost} for {purpose}: {balance} - {cost} >= {reserve}; {daily} + {cost} <= {cap}"),
        ))
    }

    /// `floor(revenue * (1 - margin_floor))`
    pub fn max_allowed_cost(&self, revenue: Cents) -> Cents {
        let keep = Ratio::from_integer(1) - self.bounds.min_job_margin_ratio;
        let max = Ratio::new(i128::from(revenue.get()) * i128::from(*keep.numer()), i128::from(*keep.denom()));
        Cents(max.floor().to_integer() as i64)
    }

    pub fn approve_job_profitability(
        &self,
        revenue: Cents,
        cost: Cents,
    ) -> Result<FiscalDecision, UnprofitableJobError> {
        let max_cost = self.max_allowed_cost(revenue);
        let floor = ratio_to_string(&self.bounds.min_job_margin_ratio);
        if cost > max_cost {
            return Err(UnprofitableJobError {
                revenue_usd_cents: revenue.get(),
                cost_usd_cents: cost.get(),
                max_allowed_cost_usd_cents: max_cost.get(),
                message: format!("Cost {cost} exceeds max {max_cost} (margin floor {floor})"),
                margin_floor: floor,
            });
        }
        Ok(FiscalDecision::approved(
            "job",
            cost,
            format!("Margin check passed: {cost} <= {max_cost} (margin floor {floor})"),
        ))
    }

    /// Token budget affordable from the remaining runway: `max(256, floor(runway_usd * 1000 / 10))`.
    pub fn negotiate_token_budget(&self, ledger: &Ledger, winning_bid_cost: Cents) -> NegotiatedBudget {
        let runway = ledger.runway_usd_cents(self.bounds.min_reserve);
        NegotiatedBudget {
            original_bid_cost_usd_cents: winning_bid_cost.get(),
            runway_usd_cents: runway.get(),
            max_tokens: negotiated_tokens(runway),
        }
    }
}

pub fn negotiated_tokens(runway: Cents) -> u64 {
    // runway_usd * 1000 / 10 == runway_cents / 100 * 100
    let tokens = Ratio::new(i128::from(runway.get()) * 1000, 100 * 10).floor().to_integer();
    (tokens.max(0) as u64).max(MIN_NEGOTIATED_TOKENS)
}
