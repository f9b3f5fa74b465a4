//! Generators and checkers shared by the randomized property and
//! acceptance test targets.

// Each test target compiles this module independently and not every
// target uses every generator.
#![allow(dead_code)]

use proptest::prelude::*;

use rex::synthesis::{Assertion, ContextTree, MaskedPattern, Segment, TestCase};

/// Patterns that respect the invariants: no empty literals, no adjacent
/// wildcards.
pub fn arb_pattern() -> impl Strategy<Value = MaskedPattern> {
    (
        prop::collection::vec("[ -~]{1,8}", 1..4),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(literals, lead, trail)| {
            let mut segments = Vec::new();
            if lead {
                segments.push(Segment::Wildcard);
            }
            for (i, text) in literals.iter().enumerate() {
                if i > 0 {
                    segments.push(Segment::Wildcard);
                }
                segments.push(Segment::Literal { text: text.clone() });
            }
            if trail {
                segments.push(Segment::Wildcard);
            }
            MaskedPattern { segments }
        })
}

/// Plan for one synthetic instruction.
#[derive(Debug, Clone)]
pub enum Shape {
    /// `v<i> = <operand> + <i>` — defines a variable.
    Assign,
    /// `<operand> * <i>` — reads the most recent variable.
    Expr,
    /// `_ * <i>` — reads the previous result.
    Underscore,
}

pub fn arb_plan() -> impl Strategy<Value = Vec<(i64, Shape, bool)>> {
    prop::collection::vec(
        (
            0..240i64,
            prop_oneof![Just(Shape::Assign), Just(Shape::Expr), Just(Shape::Underscore)],
            prop::bool::weighted(0.15),
        ),
        0..12,
    )
}

/// Renders a plan as transcript text. Every source embeds its
/// instruction index, so statement texts stay unique through rewriting.
pub fn render_session(plan: &[(i64, Shape, bool)]) -> String {
    let mut text = String::new();
    let mut now: i64 = 1_357_552_800;
    let mut last_var: Option<String> = None;
    for (i, (gap, shape, errored)) in plan.iter().enumerate() {
        if i > 0 {
            now += gap;
        }
        let stamp = chrono::DateTime::from_timestamp(now, 0)
            .unwrap()
            .format("%Y-%m-%dT%H:%M:%SZ");
        let operand = last_var.clone().unwrap_or_else(|| format!("{i}"));
        let source = match shape {
            Shape::Assign => {
                let var = format!("v{i}");
                let source = format!("{var} = {operand} + {i}");
                last_var = Some(var);
                source
            }
            Shape::Expr => format!("{operand} * {i}"),
            Shape::Underscore => format!("_ * {i}"),
        };
        text.push_str(&format!("[{stamp}] >> {source}\n"));
        if *errored {
            text.push_str(&format!("RuntimeError: fail {i}\n"));
        } else {
            text.push_str(&format!("=> {}\n", i * 2));
        }
    }
    text
}

fn arb_statement() -> impl Strategy<Value = String> {
    // Shaped like an assignment and never ending in "do", so the
    // do/end line balance stays checkable.
    "[a-z][a-z0-9]{0,5} = [a-z0-9+*]{0,8}[0-9]".prop_map(|s| s)
}

fn arb_test_case() -> impl Strategy<Value = TestCase> {
    (
        "should [a-z]{1,8}",
        prop::collection::vec(arb_statement(), 0..4),
        prop::option::of(("[a-z][a-z0-9]{0,3}", arb_pattern())),
    )
        .prop_map(|(name, statements, assertion)| TestCase {
            name,
            statements,
            smoke: assertion.is_none(),
            assertion: assertion.map(|(subject, pattern)| Assertion { subject, pattern }),
        })
}

pub fn arb_tree() -> impl Strategy<Value = ContextTree> {
    let name = prop_oneof![
        Just("Session".to_string()),
        "[A-Z][a-z]{0,5}".prop_map(|s| s),
        "[A-Z][a-z]{0,4} [A-Z][a-z]{0,4}".prop_map(|s| s),
    ];
    let leaf = (
        name.clone(),
        prop::collection::vec(arb_statement(), 0..3),
        prop::collection::vec(arb_test_case(), 0..4),
    )
        .prop_map(|(name, setup, tests)| ContextTree {
            name,
            imports: Vec::new(),
            setup,
            children: Vec::new(),
            tests,
        });
    let tree = leaf.prop_recursive(3, 24, 3, move |inner| {
        (
            name.clone(),
            prop::collection::vec(arb_statement(), 0..3),
            prop::collection::vec(inner, 0..3),
            prop::collection::vec(arb_test_case(), 0..3),
        )
            .prop_map(|(name, setup, children, tests)| ContextTree {
                name,
                setup,
                children,
                tests,
                imports: Vec::new(),
            })
    });
    (tree, prop::collection::vec("require '[a-z]{1,8}'", 0..3)).prop_map(
        |(mut tree, imports)| {
            tree.imports = imports;
            tree
        },
    )
}

pub fn do_end_balanced(text: &str) -> bool {
    let mut depth: i64 = 0;
    for line in text.lines() {
        let line = line.trim();
        if line == "do" || line.ends_with(" do") {
            depth += 1;
        } else if line == "end" {
            depth -= 1;
            if depth < 0 {
                return false;
            }
        }
    }
    depth == 0
}
