//! Sample-by-sample closed-loop realizations shared by the step-response
//! simulation and the Monte-Carlo oracle.
//!
//! Every plant has at least one sample of dead time, so the output at `t`
//! only depends on controller moves up to `t - 1`. Each plant filter is
//! therefore built with one sample less delay and fed the previous move.

use crate::cascade::CascadeParams;
use crate::error::{Error, Result};
use crate::lti::{DiscreteTransferFunction, LtiFilter};
use crate::single::ReducedPidParams;

fn shifted_filter(tf: &DiscreteTransferFunction, what: &str) -> Result<LtiFilter> {
    if tf.delay() < 1 {
        return Err(Error::InvalidProblem(format!(
            "{what} needs at least one sample of dead time"
        )));
    }
    Ok(LtiFilter::new(&tf.with_delay(tf.delay() - 1)))
}

/// Single loop with the incremental PID law
/// `u(t) = u(t-1) + k1 e(t) + k2 e(t-1) + k3 e(t-2)`.
#[derive(Debug, Clone)]
pub struct SingleLoop {
    plant: LtiFilter,
    k: ReducedPidParams,
    u_prev: f64,
    e1: f64,
    e2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSample {
    pub output: f64,
    pub error: f64,
    pub control: f64,
}

impl SingleLoop {
    pub fn new(process: &DiscreteTransferFunction, k: ReducedPidParams) -> Result<Self> {
        Ok(Self {
            plant: shifted_filter(process, "process")?,
            k,
            u_prev: 0.0,
            e1: 0.0,
            e2: 0.0,
        })
    }

    /// Swap controller coefficients; controller state carries over.
    pub fn set_params(&mut self, k: ReducedPidParams) {
        self.k = k;
    }

    /// Advance one sample. `disturbance` is the additive output
    /// disturbance at time `t`.
    pub fn step(&mut self, setpoint: f64, disturbance: f64) -> LoopSample {
        let y = self.plant.step(self.u_prev) + disturbance;
        let e = setpoint - y;
        let u = self.u_prev + self.k.k1 * e + self.k.k2 * self.e1 + self.k.k3 * self.e2;
        self.e2 = self.e1;
        self.e1 = e;
        self.u_prev = u;
        LoopSample {
            output: y,
            error: e,
            control: u,
        }
    }
}

/// PI outer loop around a P inner loop. The outer controller output is the
/// inner setpoint.
#[derive(Debug, Clone)]
pub struct CascadeLoop {
    outer: LtiFilter,
    inner: LtiFilter,
    k: CascadeParams,
    u1_prev: f64,
    e_prev: f64,
    y2_prev: f64,
    u2_prev: f64,
}

impl CascadeLoop {
    pub fn new(
        outer: &DiscreteTransferFunction,
        inner: &DiscreteTransferFunction,
        k: CascadeParams,
    ) -> Result<Self> {
        Ok(Self {
            outer: shifted_filter(outer, "outer process")?,
            inner: shifted_filter(inner, "inner process")?,
            k,
            u1_prev: 0.0,
            e_prev: 0.0,
            y2_prev: 0.0,
            u2_prev: 0.0,
        })
    }

    pub fn set_params(&mut self, k: CascadeParams) {
        self.k = k;
    }

    /// Advance one sample with additive disturbances on the outer and
    /// inner outputs.
    pub fn step(&mut self, setpoint: f64, outer_dist: f64, inner_dist: f64) -> LoopSample {
        let y2 = self.inner.step(self.u2_prev) + inner_dist;
        let y1 = self.outer.step(self.y2_prev) + outer_dist;
        let e = setpoint - y1;
        let u1 = self.u1_prev + self.k.k4 * e + self.k.k5 * self.e_prev;
        let u2 = self.k.k6 * (u1 - y2);
        self.u1_prev = u1;
        self.e_prev = e;
        self.y2_prev = y2;
        self.u2_prev = u2;
        LoopSample {
            output: y1,
            error: e,
            control: u2,
        }
    }
}
