//! External commands speaking a line protocol: one input record per stdin
//! line, one output record per stdout line, in the same order.

use std::io::Write;
use std::process::{Command, Stdio};

#[derive(Debug, thiserror::Error)]
pub enum HookError {
    #[error("cannot start `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("`{command}` failed: {message}")]
    Failed { command: String, message: String },
    #[error("`{command}` returned {got} line(s) for {expected} input(s)")]
    CountMismatch {
        command: String,
        expected: usize,
        got: usize,
    },
}

/// Replaces line breaks and tabs so a field fits on one protocol line.
pub fn one_line(text: &str) -> String {
    text.chars()
        .map(|c| if matches!(c, '\n' | '\r' | '\t') { ' ' } else { c })
        .collect()
}

/// Runs `sh -c command`, feeds `lines` on stdin and returns stdout lines.
/// The number of output lines must equal the number of inputs.
pub fn run_line_hook(command: &str, lines: &[String]) -> Result<Vec<String>, HookError> {
    let failed = |message: String| HookError::Failed {
        command: command.to_owned(),
        message,
    };
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|source| HookError::Spawn {
            command: command.to_owned(),
            source,
        })?;
    let mut input = String::with_capacity(lines.iter().map(|l| l.len() + 1).sum());
    for l in lines {
        input.push_str(l);
        input.push('\n');
    }
    let mut stdin = child.stdin.take().expect("piped stdin");
    let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
    let output = child.wait_with_output().map_err(|e| failed(e.to_string()))?;
    // A hook may exit without reading all input; that only matters if it
    // also fails or miscounts, which is checked below.
    let _ = writer.join().expect("stdin writer thread");
    if !output.status.success() {
        return Err(failed(format!("exit status {}", output.status)));
    }
    let stdout = String::from_utf8(output.stdout).map_err(|e| failed(e.to_string()))?;
    let out: Vec<String> = stdout.lines().map(str::to_owned).collect();
    if out.len() != lines.len() {
        return Err(HookError::CountMismatch {
            command: command.to_owned(),
            expected: lines.len(),
            got: out.len(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echoes_in_order() {
        let lines = vec!["a".to_string(), "b c".to_string()];
        assert_eq!(run_line_hook("cat", &lines).unwrap(), lines);
    }

    #[test]
    fn miscount_and_failure() {
        let lines = vec!["a".to_string(), "b".to_string()];
        assert!(matches!(
            run_line_hook("head -n 1", &lines),
            Err(HookError::CountMismatch { expected: 2, got: 1, .. })
        ));
        assert!(matches!(run_line_hook("exit 3", &lines), Err(HookError::Failed { .. })));
    }

    #[test]
    fn flattens_fields() {
        assert_eq!(one_line("a\tb\nc"), "a b c");
    }
}
