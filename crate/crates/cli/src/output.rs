use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// Where an artifact goes. `--out` naming a file with an extension is used
/// as is; anything else is a directory receiving the default file name.
#[derive(Debug, Clone)]
pub enum Sink {
    Stdout,
    Dir(PathBuf),
    File(PathBuf),
}

impl Sink {
    pub fn from_arg(out: Option<&Path>) -> Self {
        match out {
            None => Sink::Stdout,
            Some(p) if p.extension().is_some() && !p.is_dir() => Sink::File(p.to_path_buf()),
            Some(p) => Sink::Dir(p.to_path_buf()),
        }
    }

    /// Writes one artifact and returns its path, if any.
    pub fn emit(&self, default_name: &str, contents: &str) -> io::Result<Option<PathBuf>> {
        let path = match self {
            Sink::Stdout => {
                let mut so = io::stdout().lock();
                let written = so.write_all(contents.as_bytes()).and_then(|_| {
                    if contents.ends_with('\n') {
                        Ok(())
                    } else {
                        so.write_all(b"\n")
                    }
                });
                // a closed downstream pipe is not a failure
                return match written {
                    Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e),
                    _ => Ok(None),
                };
            }
            Sink::Dir(d) => d.join(default_name),
            Sink::File(f) => f.clone(),
        };
        write_atomic(&path, contents.as_bytes())?;
        Ok(Some(path))
    }
}

/// Write to a sibling temporary file, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}
