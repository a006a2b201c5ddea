//! Recorded command-line outputs. Set `UPDATE_GOLDENS=1` to rewrite them.

use std::path::PathBuf;

use super::fixture_path;

pub struct Case {
    pub name: &'static str,
    pub args: &'static [&'static str],
    pub exit: i32,
}

/// Arguments starting with `@` name fixture files.
pub const CASES: &[Case] = &[
    Case {
        name: "solve_fix_d.json",
        args: &["solve", "@fix_d.json"],
        exit: 0,
    },
    Case {
        name: "solve_fix_e1.json",
        args: &["solve", "@fix_e1.json"],
        exit: 0,
    },
    Case {
        name: "solve_fix_e1_at_3.json",
        args: &["solve", "@fix_e1.json", "--makespan", "3"],
        exit: 4,
    },
    Case {
        name: "solve_fix_e6.json",
        args: &["solve", "@fix_e6.json"],
        exit: 4,
    },
    Case {
        name: "solve_fix_m.json",
        args: &["solve", "@fix_m.json"],
        exit: 0,
    },
    Case {
        name: "solve_fix_m.txt",
        args: &["solve", "@fix_m.json", "--pretty"],
        exit: 0,
    },
    Case {
        name: "validate_fix_m.json",
        args: &["validate", "@fix_m.json", "@fix_m_plan.json"],
        exit: 0,
    },
    Case {
        name: "explain_fix_e1_why_wait.json",
        args: &[
            "explain",
            "@fix_e1.json",
            "--plan",
            "@fix_e1_plan1.json",
            "--why-wait",
            "A2:8",
        ],
        exit: 0,
    },
    Case {
        name: "explain_fix_e1_why_wait.txt",
        args: &[
            "explain",
            "@fix_e1.json",
            "--plan",
            "@fix_e1_plan1.json",
            "--why-wait",
            "A2:8",
            "--pretty",
        ],
        exit: 0,
    },
    Case {
        name: "explain_fix_e6_why_infeasible.json",
        args: &["explain", "@fix_e6.json", "--why-infeasible"],
        exit: 0,
    },
    Case {
        name: "explain_fix_e6_why_infeasible.txt",
        args: &["explain", "@fix_e6.json", "--why-infeasible", "--pretty"],
        exit: 0,
    },
    Case {
        name: "explain_fix_e1_check_plan.json",
        args: &["explain", "@fix_e1.json", "--check-plan", "@fix_e1_plan2.json"],
        exit: 0,
    },
    Case {
        name: "explain_fix_e1_why_nonoptimal.json",
        args: &["explain", "@fix_e1.json", "--why-nonoptimal", "@fix_e1_plan1.json"],
        exit: 0,
    },
    Case {
        name: "dynamic_fix_d.json",
        args: &[
            "dynamic",
            "@fix_d.json",
            "--events",
            "@fix_d_events.json",
            "--plan",
            "@fix_d_plan.json",
        ],
        exit: 0,
    },
    Case {
        name: "dynamic_fix_d.txt",
        args: &[
            "dynamic",
            "@fix_d.json",
            "--events",
            "@fix_d_events.json",
            "--plan",
            "@fix_d_plan.json",
            "--pretty",
        ],
        exit: 0,
    },
    Case {
        name: "dynamic_fix_d_no_slack.json",
        args: &[
            "dynamic",
            "@fix_d.json",
            "--events",
            "@fix_d_events.json",
            "--delta-max",
            "0",
        ],
        exit: 0,
    },
];

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("golden")
        .join(name)
}

/// Runs one case, returning the exit code and standard output.
pub fn run(case: &Case) -> (i32, Vec<u8>) {
    let mut argv = vec!["mmapf".to_owned()];
    for a in case.args {
        match a.strip_prefix('@') {
            Some(name) => argv.push(fixture_path(name).to_string_lossy().into_owned()),
            None => argv.push((*a).to_owned()),
        }
    }
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = mmapf::cli::run_cli(argv, &mut out, &mut err);
    (code, out)
}

/// Compares a case against its recorded output; `Err` describes the first
/// mismatch.
pub fn check(case: &Case) -> Result<(), String> {
    let (code, out) = run(case);
    if code != case.exit {
        return Err(format!("{}: exit {code}, expected {}", case.name, case.exit));
    }
    let path = golden_path(case.name);
    if std::env::var_os("UPDATE_GOLDENS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &out).unwrap();
    }
    let recorded = std::fs::read(&path).map_err(|e| format!("{}: {e}", case.name))?;
    if recorded != out {
        return Err(format!("{}: output differs from the recording", case.name));
    }
    let (_, again) = run(case);
    if again != out {
        return Err(format!("{}: second run differs", case.name));
    }
    Ok(())
}
