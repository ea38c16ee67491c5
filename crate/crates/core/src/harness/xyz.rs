//! XYZ geometry export.

use std::io::Write;

use crate::error::Result;

/// Element symbol written for every atom of the Morse island.
pub const ELEMENT: &str = "Pt";

/// Writes one XYZ frame: atom count, comment line, then `Pt x y z` per atom.
pub fn write_xyz<W: Write>(mut w: W, positions: &[[f64; 3]], comment: &str) -> Result<()> {
    writeln!(w, "{}", positions.len())?;
    writeln!(w, "{}", comment.replace('\n', " "))?;
    for p in positions {
        writeln!(w, "{ELEMENT} {:.10} {:.10} {:.10}", p[0], p[1], p[2])?;
    }
    Ok(())
}
