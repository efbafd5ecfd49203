//! JSON profile files.
//!
//! ```json
//! {
//!   "num_users": 4,
//!   "profiles": [
//!     {
//!       "pair": {"i": 0, "j": 1},
//!       "similarity": 0.42,
//!       "surface": {"a": 20.0, "b": 6.0, "d": -2.8, "rho_min": 0.09, "rho_max": 0.59},
//!       "envelope_i": {"breakpoints": [[0.0625, 0.011], [1.0, 0.0017]]},
//!       "envelope_j": {"breakpoints": [[0.0625, 0.010], [1.0, 0.0016]]}
//!     }
//!   ]
//! }
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::PairProfileSet;
use crate::error::Result;

pub fn save_profiles(set: &PairProfileSet, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, set)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Reads a profile file and re-validates it.
pub fn load_profiles(path: &Path) -> Result<PairProfileSet> {
    let raw: PairProfileSet = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    let n = raw.num_users();
    PairProfileSet::new(n, raw.iter().cloned().collect())
}
