//! Black-box predictor running as a child process.
//!
//! One child serves a whole explanation run. Each request writes a
//! `B x H x W x C` array to the child's stdin and waits for a `B x K` array on
//! its stdout, both in `.npy` format. Requests are strictly serial.

use std::io::{BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread::JoinHandle;
use std::time::Duration;

use xaikit_core::error::PredictorError;
use xaikit_core::perturb::Predictor;
use xaikit_core::Tensor;

use crate::error::{CliError, CliResult};
use crate::npy::{read_npy, write_npy, NpyError};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, thiserror::Error)]
pub enum ChannelError {
    #[error("predictor did not answer within {0:?}")]
    Timeout(Duration),
    #[error("predictor closed its output ({0})")]
    Closed(String),
    #[error("cannot send batch to predictor: {0}")]
    Write(std::io::Error),
    #[error("unreadable predictor output: {0}")]
    Output(NpyError),
}

pub struct SubprocessPredictor {
    command: String,
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    replies: Receiver<Result<Tensor, NpyError>>,
    reader: Option<JoinHandle<()>>,
    batch_limit: usize,
    timeout: Duration,
}

impl SubprocessPredictor {
    /// Starts `command` through `sh -c`.
    pub fn spawn(command: &str, batch_limit: usize, timeout: Duration) -> CliResult<Self> {
        if batch_limit == 0 {
            return Err(CliError::Usage("batch limit must be positive".into()));
        }
        let mut sh = Command::new("sh");
        sh.arg("-c").arg(command);
        // own process group, so a timeout can take down whatever `sh` started
        #[cfg(unix)]
        std::os::unix::process::CommandExt::process_group(&mut sh, 0);
        let mut child = sh
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| CliError::Spawn {
                command: command.to_string(),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, replies) = mpsc::channel();
        let reader = std::thread::spawn(move || {
            let mut out = BufReader::new(stdout);
            loop {
                let reply = read_npy(&mut out);
                let stop = reply.is_err();
                if tx.send(reply).is_err() || stop {
                    break;
                }
            }
        });
        Ok(Self {
            command: command.to_string(),
            child,
            stdin: Some(BufWriter::new(stdin)),
            replies,
            reader: Some(reader),
            batch_limit,
            timeout,
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    fn kill(&mut self) {
        #[cfg(unix)]
        // SAFETY: kill(2) on our own child's process group has no memory effects.
        unsafe {
            libc::kill(-(self.child.id() as libc::pid_t), libc::SIGKILL);
        }
        let _ = self.child.kill();
    }

    fn exit_note(&mut self) -> String {
        match self.child.try_wait() {
            Ok(Some(status)) => format!("child {status}"),
            _ => "child still running".to_string(),
        }
    }

    fn request(&mut self, batch: &Tensor) -> Result<Tensor, ChannelError> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| ChannelError::Closed("channel already shut down".into()))?;
        write_npy(stdin, batch)
            .and_then(|_| stdin.flush())
            .map_err(ChannelError::Write)?;
        match self.replies.recv_timeout(self.timeout) {
            Ok(Ok(t)) => Ok(t),
            Ok(Err(NpyError::Io(e))) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                std::thread::sleep(Duration::from_millis(20));
                Err(ChannelError::Closed(self.exit_note()))
            }
            Ok(Err(e)) => Err(ChannelError::Output(e)),
            Err(RecvTimeoutError::Timeout) => {
                self.kill();
                self.stdin = None;
                Err(ChannelError::Timeout(self.timeout))
            }
            Err(RecvTimeoutError::Disconnected) => Err(ChannelError::Closed(self.exit_note())),
        }
    }

    /// Closes stdin and waits for the child; a nonzero exit is an error.
    pub fn finish(mut self) -> CliResult<()> {
        self.stdin = None;
        let status = self.child.wait().map_err(|e| CliError::io(&self.command, e))?;
        if let Some(r) = self.reader.take() {
            let _ = r.join();
        }
        if !status.success() {
            return Err(CliError::Check(format!("predictor {:?} exited with {status}", self.command)));
        }
        Ok(())
    }
}

impl Predictor for SubprocessPredictor {
    fn predict(&mut self, batch: &Tensor) -> Result<Tensor, PredictorError> {
        self.request(batch).map_err(Into::into)
    }

    fn batch_limit(&self) -> usize {
        self.batch_limit
    }
}

impl Drop for SubprocessPredictor {
    fn drop(&mut self) {
        self.stdin = None;
        if matches!(self.child.try_wait(), Ok(None)) {
            self.kill();
            let _ = self.child.wait();
        }
    }
}

/// Behaviours of the built-in test child.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StubMode {
    /// Every row is `[0.5, 0.5]`.
    Constant,
    /// Echoes each sample flattened to one row.
    Identity,
    /// Answers with one row too many.
    WrongRows,
    /// `[x, 1 - x]` where `x` is the first channel of the top-left pixel.
    Probe,
    /// `[m, 1 - m]` where `m` is the sample mean.
    Mean,
    /// Serves `--after` batches, then exits with status 3.
    FailAfter,
    /// Never answers.
    Hang,
}

/// Request loop of the built-in test child. Returns the process exit code.
pub fn run_stub(mode: StubMode, after: usize) -> i32 {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut input = BufReader::new(stdin.lock());
    let mut output = BufWriter::new(stdout.lock());
    let mut served = 0;
    loop {
        let batch = match read_npy(&mut input) {
            Ok(b) => b,
            Err(NpyError::Io(e)) if e.kind() == std::io::ErrorKind::UnexpectedEof => return 0,
            Err(e) => {
                eprintln!("predictor-stub: {e}");
                return 2;
            }
        };
        if mode == StubMode::FailAfter && served >= after {
            return 3;
        }
        if mode == StubMode::Hang {
            std::thread::sleep(Duration::from_secs(3600));
        }
        let b = batch.shape()[0];
        let per = batch.len() / b;
        let rows: Vec<Vec<f64>> = match mode {
            StubMode::Identity => batch.data().chunks_exact(per).map(<[f64]>::to_vec).collect(),
            StubMode::Probe => batch.data().chunks_exact(per).map(|s| vec![s[0], 1.0 - s[0]]).collect(),
            StubMode::Mean => batch
                .data()
                .chunks_exact(per)
                .map(|s| {
                    let m = s.iter().sum::<f64>() / per as f64;
                    vec![m, 1.0 - m]
                })
                .collect(),
            StubMode::WrongRows => vec![vec![0.5, 0.5]; b + 1],
            _ => vec![vec![0.5, 0.5]; b],
        };
        let reply = Tensor::from_rows(&rows).expect("stub output is finite");
        if write_npy(&mut output, &reply).and_then(|_| output.flush()).is_err() {
            return 0;
        }
        served += 1;
    }
}
