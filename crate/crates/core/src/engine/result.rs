use std::io::Write;

use serde::{Deserialize, Serialize};

use super::state::SimState;
use super::StopReason;

/// One row of the run's time series, taken after an event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub event: u64,
    pub t: f64,
    pub n_visited: u64,
    pub active: u64,
    pub frontier_max: Vec<i64>,
    pub frontier_min: Vec<i64>,
}

impl SeriesRow {
    pub fn snapshot(state: &SimState) -> Self {
        Self {
            event: state.events_processed(),
            t: state.clock,
            n_visited: state.n_visited() as u64,
            active: state.active_count(),
            frontier_max: state.frontier_max().to_vec(),
            frontier_min: state.frontier_min().to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub stop_reason: StopReason,
    pub final_t: f64,
    pub n_visited: u64,
    pub active: u64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct SimResult {
    pub series: Vec<SeriesRow>,
    pub stop_reason: StopReason,
    pub state: SimState,
}

impl SimResult {
    pub fn summary(&self) -> SimSummary {
        SimSummary {
            stop_reason: self.stop_reason,
            final_t: self.state.clock,
            n_visited: self.state.n_visited() as u64,
            active: self.state.active_count(),
            seed: self.state.config.seed,
        }
    }

    /// Writes the series as CSV:
    /// `event,t,n_visited,active,frontier_max_1,frontier_min_1,...`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let dim = self.state.dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["event".to_string(), "t".into(), "n_visited".into(), "active".into()];
        for axis in 1..=dim {
            header.push(format!("frontier_max_{axis}"));
            header.push(format!("frontier_min_{axis}"));
        }
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for row in &self.series {
            record.clear();
            record.push(row.event.to_string());
            record.push(row.t.to_string());
            record.push(row.n_visited.to_string());
            record.push(row.active.to_string());
            for (hi, lo) in row.frontier_max.iter().zip(&row.frontier_min) {
                record.push(hi.to_string());
                record.push(lo.to_string());
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use crate::engine::{simulate, SimConfig, StopCriteria};
    use crate::laws::{InitLaw, JumpLaw};

    #[test]
    fn csv_header_and_summary() {
        let cfg = SimConfig::new(2, JumpLaw::point_mass(1.0), InitLaw::deterministic(1), 7)
            .with_stop(StopCriteria::until(1.5));
        let res = simulate(cfg).unwrap();
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "event,t,n_visited,active,frontier_max_1,frontier_min_1,frontier_max_2,frontier_min_2"
        );
        assert_eq!(lines.next().unwrap(), "0,0,1,1,0,0,0,0");
        let json = serde_json::to_value(res.summary()).unwrap();
        assert_eq!(json["stop_reason"], "t_max");
        assert_eq!(json["seed"], 7);
        for key in ["final_t", "n_visited", "active"] {
            assert!(json.get(key).is_some());
        }
    }
}
