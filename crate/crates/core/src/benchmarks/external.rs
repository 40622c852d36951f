//! Objective evaluated by a child process.
//!
//! Protocol: the child reads one whitespace-separated `D`-vector per line on
//! stdin and answers with one scalar per line on stdout, flushing after each
//! line.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use super::Objective;
use crate::domain::BoxDomain;
use crate::error::{dim_mismatch, Error, Result};

pub struct ExternalObjective {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    domain: BoxDomain,
}

impl ExternalObjective {
    /// Starts `program args...` with piped stdin/stdout.
    pub fn spawn(program: &str, args: &[String], domain: BoxDomain) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::External(format!("failed to start '{program}': {e}")))?;
        let stdin = child.stdin.take().ok_or_else(|| Error::External("no stdin".into()))?;
        let stdout = child.stdout.take().ok_or_else(|| Error::External("no stdout".into()))?;
        Ok(Self { child, stdin, stdout: BufReader::new(stdout), domain })
    }

    pub fn query(&mut self, x: &[f64]) -> Result<f64> {
        if x.len() != self.domain.dim() {
            return Err(dim_mismatch("external objective input", self.domain.dim(), x.len()));
        }
        if !self.domain.contains(x) {
            return Err(Error::InvalidArgument("external objective input outside the domain".into()));
        }
        let line: Vec<String> = x.iter().map(|v| format!("{v:e}")).collect();
        writeln!(self.stdin, "{}", line.join(" ")).map_err(|e| Error::External(e.to_string()))?;
        self.stdin.flush().map_err(|e| Error::External(e.to_string()))?;
        let mut reply = String::new();
        let n = self.stdout.read_line(&mut reply).map_err(|e| Error::External(e.to_string()))?;
        if n == 0 {
            return Err(Error::External("child closed its output".into()));
        }
        let v: f64 = reply
            .trim()
            .parse()
            .map_err(|_| Error::External(format!("expected a scalar, got '{}'", reply.trim())))?;
        if !v.is_finite() {
            return Err(Error::External(format!("non-finite value {v}")));
        }
        Ok(v)
    }
}

impl Objective for ExternalObjective {
    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn evaluate(&mut self, x: &[f64], _rng: &mut dyn rand::Rng) -> Result<f64> {
        self.query(x)
    }
}

impl Drop for ExternalObjective {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;

    #[test]
    fn echoes_first_coordinate_sum() {
        // one awk per line, so input buffering in awk cannot stall the reply
        let script = r#"while read l; do echo "$l" | awk '{ print $1 + $2 }'; done"#.to_string();
        let mut obj = ExternalObjective::spawn("sh", &["-c".into(), script], BoxDomain::unit(2)).unwrap();
        assert_eq!(obj.query(&[0.25, 0.5]).unwrap(), 0.75);
        assert_eq!(obj.query(&[-1.0, 0.0]).unwrap(), -1.0);
        assert!(obj.query(&[2.0, 0.0]).is_err());
    }

    #[test]
    fn bad_reply_is_an_error() {
        let script = "while read l; do echo nope; done".to_string();
        let mut obj = ExternalObjective::spawn("sh", &["-c".into(), script], BoxDomain::unit(1)).unwrap();
        assert!(matches!(obj.query(&[0.0]), Err(Error::External(_))));
    }
}
