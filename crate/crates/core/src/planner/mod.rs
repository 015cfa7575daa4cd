//! Trajectory search over reaching-distance fields.
//!
//! All planners share one convention: fields return transformed values
//! where larger is closer (goal maps to 1, obstacles to -1), so every
//! search is an argmax. Moving to the highest-valued candidate is the
//! same decision as moving to the lowest predicted distance, and it is
//! invariant under any strictly increasing re-labeling of the field.
//!
//! Three search regimes share the [`Trajectory`] type: discrete greedy
//! stepping over grid cells, continuous gradient ascent in the
//! normalized plane, and fixed-schedule stepping through 3D scenes with
//! optional pose-affordance checks.

mod fields;
mod search2d;
mod search3d;

pub(crate) use fields::grid_goal_vec;
pub use fields::{
    GridField, ModelGridField, ModelPlaneField, ModelSpaceField, OracleGridField,
    OracleSpaceField, PlaneField, SpaceField,
};
pub(crate) use search3d::dist3;
pub use search2d::{
    default_max_steps, gradient_descent_search, gradient_descent_search_field, greedy_search,
    greedy_search_field, multi_agent_search, multi_agent_search_with, MultiAgentOutcome,
};
pub use search3d::{
    affordance_filter, step_search_3d, step_search_3d_field, Affordance, PoseStub, StepSchedule,
};

use crate::field::FieldError;
use crate::fmm::FmmError;
use crate::grid2d::{GridPos, NormCoord};
use crate::scalar::{cast, to_f64, Scalar};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("bad endpoint: {0}")]
    BadEndpoint(String),
    #[error("{0}")]
    BadInput(String),
    #[error("bad trajectory text: {0}")]
    BadFormat(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Grid(#[from] crate::grid2d::GridError),
    #[error(transparent)]
    Solver(#[from] FmmError),
}

/// How a search ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchStatus {
    ReachedGoal,
    StepBudgetExceeded,
    Stuck,
}

impl core::fmt::Display for SearchStatus {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            SearchStatus::ReachedGoal => "reached_goal",
            SearchStatus::StepBudgetExceeded => "step_budget_exceeded",
            SearchStatus::Stuck => "stuck",
        })
    }
}

impl core::str::FromStr for SearchStatus {
    type Err = PlannerError;

    fn from_str(s: &str) -> Result<Self, PlannerError> {
        match s {
            "reached_goal" => Ok(SearchStatus::ReachedGoal),
            "step_budget_exceeded" => Ok(SearchStatus::StepBudgetExceeded),
            "stuck" => Ok(SearchStatus::Stuck),
            other => Err(PlannerError::BadFormat(format!(
                "unknown search status {other:?}"
            ))),
        }
    }
}

/// A position type a trajectory can be made of. Implementations define
/// the mode tag in the serialized header and how one point reads and
/// writes its coordinate fields.
pub trait PathPoint: Sized + Clone {
    const MODE: &'static str;
    /// Coordinate tokens per serialized line (the value token follows).
    const FIELDS: usize;
    fn write_coords(&self, out: &mut String);
    fn parse_coords(fields: &[&str]) -> Option<Self>;
}

impl PathPoint for GridPos {
    const MODE: &'static str = "grid";
    const FIELDS: usize = 2;

    fn write_coords(&self, out: &mut String) {
        let _ = write!(out, "{} {}", self.row, self.col);
    }

    fn parse_coords(fields: &[&str]) -> Option<Self> {
        Some(GridPos::new(fields[0].parse().ok()?, fields[1].parse().ok()?))
    }
}

impl<T: Scalar> PathPoint for NormCoord<T> {
    const MODE: &'static str = "plane";
    const FIELDS: usize = 2;

    fn write_coords(&self, out: &mut String) {
        let _ = write!(out, "{} {}", to_f64(self.u), to_f64(self.v));
    }

    fn parse_coords(fields: &[&str]) -> Option<Self> {
        let u: f64 = fields[0].parse().ok()?;
        let v: f64 = fields[1].parse().ok()?;
        Some(NormCoord::new(cast::<T>(u), cast::<T>(v)))
    }
}

impl<T: Scalar> PathPoint for [T; 3] {
    const MODE: &'static str = "space";
    const FIELDS: usize = 3;

    fn write_coords(&self, out: &mut String) {
        let _ = write!(
            out,
            "{} {} {}",
            to_f64(self[0]),
            to_f64(self[1]),
            to_f64(self[2])
        );
    }

    fn parse_coords(fields: &[&str]) -> Option<Self> {
        let mut out = [T::zero(); 3];
        for (o, f) in out.iter_mut().zip(fields) {
            *o = cast::<T>(f.parse::<f64>().ok()?);
        }
        Some(out)
    }
}

/// An executed search path: the visited positions, the field value the
/// planner saw at each of them, and how the search ended. Always holds
/// at least the start point; `values` runs parallel to `points`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<P, T> {
    pub points: Vec<P>,
    pub values: Vec<T>,
    pub status: SearchStatus,
}

impl<P, T> Trajectory<P, T> {
    pub fn new(points: Vec<P>, values: Vec<T>, status: SearchStatus) -> Self {
        assert!(!points.is_empty(), "a trajectory holds at least its start");
        assert_eq!(points.len(), values.len());
        Trajectory {
            points,
            values,
            status,
        }
    }

    /// Number of moves taken, one less than the number of points.
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }
}

impl<P: PathPoint, T: Scalar> core::fmt::Display for Trajectory<P, T> {
    /// Header `<mode> <status> <steps>`, then one line per point:
    /// coordinates followed by the predicted value. Coordinates
    /// round-trip exactly; values carry nine decimals.
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        writeln!(f, "{} {} {}", P::MODE, self.status, self.steps())?;
        for (p, v) in self.points.iter().zip(&self.values) {
            let mut line = String::new();
            p.write_coords(&mut line);
            writeln!(f, "{line} {:.9}", to_f64(*v))?;
        }
        Ok(())
    }
}

impl<P: PathPoint, T: Scalar> core::str::FromStr for Trajectory<P, T> {
    type Err = PlannerError;

    fn from_str(s: &str) -> Result<Self, PlannerError> {
        let bad = |msg: String| PlannerError::BadFormat(msg);
        let mut lines = s.lines();
        let header = lines.next().ok_or_else(|| bad("empty input".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 3 {
            return Err(bad(format!("header {header:?} is not `mode status steps`")));
        }
        if head[0] != P::MODE {
            return Err(bad(format!(
                "mode {:?} does not match expected {:?}",
                head[0],
                P::MODE
            )));
        }
        let status: SearchStatus = head[1].parse()?;
        let steps: usize = head[2]
            .parse()
            .map_err(|_| bad(format!("bad step count {:?}", head[2])))?;
        let mut points = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != P::FIELDS + 1 {
                return Err(bad(format!(
                    "line {line:?} has {} fields, expected {}",
                    fields.len(),
                    P::FIELDS + 1
                )));
            }
            let point = P::parse_coords(&fields[..P::FIELDS])
                .ok_or_else(|| bad(format!("bad coordinates in {line:?}")))?;
            let value: f64 = fields[P::FIELDS]
                .parse()
                .map_err(|_| bad(format!("bad value in {line:?}")))?;
            points.push(point);
            values.push(cast::<T>(value));
        }
        if points.is_empty() {
            return Err(bad("no points".into()));
        }
        if points.len() != steps + 1 {
            return Err(bad(format!(
                "{} points do not match declared {} steps",
                points.len(),
                steps
            )));
        }
        Ok(Trajectory {
            points,
            values,
            status,
        })
    }
}
