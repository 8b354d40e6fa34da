use std::fs;
use std::io::Write;
use std::path::Path;

use catfuse::{Error, Result};
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

/// Write `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize>(doc: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(doc).map_err(Error::from)?;
    v.push(b'\n');
    Ok(v)
}

/// `# {header json}` line followed by the CSV body.
pub fn csv_with_header<T: Serialize>(header: &T, body: Vec<u8>) -> Result<Vec<u8>> {
    let mut out = b"# ".to_vec();
    out.extend(serde_json::to_vec(header).map_err(Error::from)?);
    out.push(b'\n');
    out.extend(body);
    Ok(out)
}
