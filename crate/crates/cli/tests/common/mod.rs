#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

use stormlet::builder::{build_explicit, build_model, BuildNumber, BuildOptions};
use stormlet::checker::inline_program_identifiers;
use stormlet::model::Model;
use stormlet::number::Field;
use stormlet::prism::{parse_bindings, parse_explicit, parse_program, Program};
use stormlet::property::{parse_properties, Property};

/// A bundled model with its property file.
#[derive(Debug, Clone, Copy)]
pub struct Bundled {
    pub name: &'static str,
    pub file: &'static str,
    pub props: &'static str,
    pub constants: &'static str,
}

const fn bundled(name: &'static str, file: &'static str, props: &'static str, constants: &'static str) -> Bundled {
    Bundled {
        name,
        file,
        props,
        constants,
    }
}

pub const CORPUS: &[Bundled] = &[
    bundled("die", "die.pm", "die.props", ""),
    bundled("herman3", "herman3.pm", "herman3.props", ""),
    bundled("brp", "brp.pm", "brp.props", "N=16,MAX=2"),
    bundled("coin", "coin.pm", "coin.props", ""),
    bundled("slow20", "slow20.pm", "slow20.props", ""),
    bundled("detour", "detour.nm", "detour.props", ""),
    bundled("cycle", "cycle.nm", "cycle.props", ""),
    bundled("single", "single.sm", "single.props", ""),
    bundled("erlang2", "erlang2.sm", "erlang2.props", ""),
    bundled("race", "race.ma", "race.props", ""),
];

pub const PARAMETRIC: &[Bundled] = &[
    bundled("pdie", "pdie.pm", "pdie.props", ""),
    bundled("twoparam", "twoparam.pm", "twoparam.props", ""),
];

pub const EXPLICIT_PROPS: &str = "P=?[F \"t\"]\nR=?[F \"t\"]";

pub fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

pub fn read(file: &str) -> String {
    std::fs::read_to_string(models_dir().join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

impl Bundled {
    pub fn program(&self) -> Program {
        parse_program(&read(self.file)).unwrap()
    }

    pub fn properties(&self) -> Vec<Property> {
        let program = self.program();
        parse_properties(&read(self.props))
            .unwrap()
            .iter()
            .map(|p| inline_program_identifiers(p, &program))
            .collect()
    }

    pub fn build<N: BuildNumber>(&self) -> Model<N> {
        self.build_with(Default::default())
    }

    pub fn build_with<N: BuildNumber>(&self, parameters: std::collections::BTreeSet<String>) -> Model<N> {
        let options = BuildOptions {
            constants: parse_bindings(self.constants).unwrap(),
            parameters,
            ..BuildOptions::default()
        };
        build_model(&self.program(), &options).unwrap()
    }

    pub fn cli_args(&self) -> Vec<String> {
        let mut args = vec![
            "--prism".to_string(),
            self.file.to_string(),
            "--prop".to_string(),
            self.props.to_string(),
        ];
        if !self.constants.is_empty() {
            args.push("--constants".to_string());
            args.push(self.constants.to_string());
        }
        args
    }
}

/// The three-state explicit model.
pub fn explicit_model<N: Field>() -> Model<N> {
    let parsed = parse_explicit(&read("three.tra"), &read("three.lab"), Some(&read("three.rew"))).unwrap();
    build_explicit(&parsed, false).unwrap()
}

pub fn explicit_properties() -> Vec<Property> {
    parse_properties(EXPLICIT_PROPS).unwrap()
}

/// Runs the binary inside the models directory.
pub fn stormlet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stormlet"))
        .args(args)
        .current_dir(models_dir())
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}
