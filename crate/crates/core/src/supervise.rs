//! Child processes with a wall-clock limit. Each child leads its own process
//! group so a timeout kills everything it spawned.

use std::fs::File;
use std::path::Path;
use std::process::{Command, ExitStatus, Stdio};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

const POLL: Duration = Duration::from_millis(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Exited(ExitStatus),
    TimedOut,
}

#[derive(Debug, Clone, Copy)]
pub struct Finished {
    pub outcome: Outcome,
    pub wall: Duration,
}

/// Spawn `cmd` with output captured to `log` and wait at most `limit`.
/// Launch failures are `AgentLaunch` errors.
pub fn run_with_timeout(cmd: &mut Command, limit: Duration, log: Option<&Path>) -> Result<Finished> {
    use std::os::unix::process::CommandExt;
    cmd.stdin(Stdio::null()).process_group(0);
    match log {
        Some(p) => {
            let f = File::create(p).map_err(|e| Error::io(p, e))?;
            let g = f.try_clone().map_err(|e| Error::io(p, e))?;
            cmd.stdout(f).stderr(g);
        }
        None => {
            cmd.stdout(Stdio::null()).stderr(Stdio::null());
        }
    }
    let start = Instant::now();
    let mut child = cmd
        .spawn()
        .map_err(|e| Error::AgentLaunch(format!("{:?}: {e}", cmd.get_program())))?;
    let pid = child.id() as i32;
    loop {
        if let Some(status) = child.try_wait().map_err(|e| Error::AgentLaunch(e.to_string()))? {
            // Stragglers left in the group do not outlive the attempt.
            kill_group(pid);
            return Ok(Finished {
                outcome: Outcome::Exited(status),
                wall: start.elapsed(),
            });
        }
        if start.elapsed() >= limit {
            kill_group(pid);
            let _ = child.kill();
            let _ = child.wait();
            return Ok(Finished {
                outcome: Outcome::TimedOut,
                wall: start.elapsed(),
            });
        }
        std::thread::sleep(POLL);
    }
}

fn kill_group(pgid: i32) {
    // SAFETY: plain syscall on a group id we created; failure (no such
    // group) is harmless.
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
}
