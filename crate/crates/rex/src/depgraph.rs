//! Variable dependencies between instructions: lexical def/use
//! extraction, last-result (`_`) resolution, and grouping of bursts into
//! a nested context tree that hoists shared definitions.
//!
//! The def/use analysis is deliberately lexical. An identifier to the
//! left of a top-level assignment operator is a definition; any other
//! lowercase identifier that isn't a keyword and doesn't follow `.` is a
//! use. This misreads the occasional local block parameter, which costs
//! at worst a too-conservative grouping, never a broken one: a test that
//! shares a variable with nobody simply keeps its statements inline.
//!
//! Grouping works on *variables*, not on text. A variable is shared when
//! some burst other than its defining burst uses it (reading it in a
//! statement or asserting on it). Shared definitions are hoisted into
//! the context that covers all their users; unshared ones stay in their
//! test's body. Names invented by the rewrite (`x`, `y`, ...) restart in
//! every burst, so they are tracked per burst and never conflated across
//! bursts.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::lex::{self, TokenKind};
use crate::sessionizer::Burst;
use crate::synthesis::{self, ContextTree, TestCase};
use crate::transcript::Session;

/// Definitions and uses per instruction index.
///
/// Uses are kept only when an earlier statement defines the identifier
/// (or it is the `_` placeholder); everything else is assumed to be a
/// global or a method and is irrelevant for grouping. Build the facts
/// from the same statements that will be grouped.
#[derive(Debug, Clone, Default)]
pub struct VariableFacts {
    defs: HashMap<usize, Vec<String>>,
    uses: HashMap<usize, Vec<String>>,
}

impl VariableFacts {
    /// Collects facts from `(instruction index, statement text)` pairs,
    /// which must come in session order for the earlier-definition
    /// filter to make sense.
    pub fn collect<'a>(statements: impl IntoIterator<Item = (usize, &'a str)>) -> VariableFacts {
        let mut facts = VariableFacts::default();
        let mut defined: HashSet<String> = HashSet::new();
        for (index, text) in statements {
            let (defs, raw_uses) = extract_defs_uses(text);
            let uses = raw_uses
                .into_iter()
                .filter(|u| u == "_" || defined.contains(u))
                .collect();
            defined.extend(defs.iter().cloned());
            facts.defs.insert(index, defs);
            facts.uses.insert(index, uses);
        }
        facts
    }

    pub fn defs(&self, index: usize) -> &[String] {
        self.defs.get(&index).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn uses(&self, index: usize) -> &[String] {
        self.uses.get(&index).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Scans one statement for defined and used identifiers.
///
/// Defs: lowercase identifiers immediately left of a top-level
/// assignment operator. Uses: any other lowercase identifier that isn't
/// a keyword, doesn't follow `.`, and isn't among this statement's defs.
/// Both lists are first-occurrence ordered and duplicate-free.
pub fn extract_defs_uses(source: &str) -> (Vec<String>, Vec<String>) {
    let tokens = lex::tokenize(source);
    let mut defs: Vec<String> = Vec::new();
    for i in 1..tokens.len() {
        let token = &tokens[i];
        if token.kind == TokenKind::Op
            && token.depth == 0
            && lex::ASSIGN_OPS.contains(&token.text.as_str())
        {
            let prev = &tokens[i - 1];
            if prev.is_lower_ident() && !prev.after_dot && !prev.is_keyword() {
                push_unique(&mut defs, &prev.text);
            }
        }
    }
    let mut uses: Vec<String> = Vec::new();
    for token in &tokens {
        if token.is_lower_ident()
            && !token.after_dot
            && !token.is_keyword()
            && !defs.contains(&token.text)
        {
            push_unique(&mut uses, &token.text);
        }
    }
    (defs, uses)
}

fn push_unique(list: &mut Vec<String>, name: &str) {
    if !list.iter().any(|n| n == name) {
        list.push(name.to_string());
    }
}

/// If the statement is shaped `name <assign-op> ...` at top level,
/// returns the assigned name.
pub fn leading_assignment(source: &str) -> Option<String> {
    let tokens = lex::tokenize(source);
    match (tokens.first(), tokens.get(1)) {
        (Some(first), Some(second))
            if first.is_lower_ident()
                && !first.is_keyword()
                && second.kind == TokenKind::Op
                && second.depth == 0
                && lex::ASSIGN_OPS.contains(&second.text.as_str()) =>
        {
            Some(first.text.clone())
        }
        _ => None,
    }
}

/// Every name the session itself assigns to, across all instructions.
/// Fresh names must avoid these.
pub fn session_defined_names(session: &Session) -> HashSet<String> {
    session
        .instructions
        .iter()
        .flat_map(|i| extract_defs_uses(&i.source).0)
        .collect()
}

/// One instruction after `_` resolution, still carrying its error flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewrittenStatement {
    /// Index of the originating instruction within the session.
    pub instruction_index: usize,
    pub text: String,
    pub errored: bool,
}

/// A burst rewritten into plain statements: `_` replaced by real
/// variables, anonymous results named.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewrittenBurst {
    pub statements: Vec<RewrittenStatement>,
    /// Names invented by the rewrite, in allocation order. These are
    /// burst-local: other bursts may reuse them.
    pub fresh_names: Vec<String>,
    /// The variable holding the burst's final value, or `None` when the
    /// final instruction errored.
    pub subject: Option<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RewriteError {
    /// `_` appeared before any non-errored instruction in its burst, so
    /// there is no value it could refer to.
    #[error("instruction {instruction_index}: `_` refers to no previous result in its burst")]
    DanglingUnderscore { instruction_index: usize },
}

/// Rewrites a burst so it can run outside the REPL: each `_` becomes
/// the name of the nearest preceding non-errored instruction's value,
/// inventing `name = <source>` wrappers where that instruction didn't
/// assign one, and the final instruction's value (the assertion subject)
/// always gets a name unless it errored.
///
/// `reserved` holds names the session assigns itself; invented names
/// skip them.
pub fn resolve_last_result(
    burst: &Burst,
    reserved: &HashSet<String>,
) -> Result<RewrittenBurst, RewriteError> {
    let instructions = &burst.instructions;
    let n = instructions.len();

    let mut binder: Vec<Option<usize>> = vec![None; n];
    let mut need_name = vec![false; n];
    let mut last_clean: Option<usize> = None;
    for k in 0..n {
        if has_underscore(&instructions[k].source) {
            match last_clean {
                Some(j) => {
                    binder[k] = Some(j);
                    need_name[j] = true;
                }
                None => {
                    return Err(RewriteError::DanglingUnderscore {
                        instruction_index: instructions[k].index,
                    })
                }
            }
        }
        if instructions[k].error.is_none() {
            last_clean = Some(k);
        }
    }
    let subject_position = match instructions.last() {
        Some(last) if last.error.is_none() => {
            need_name[n - 1] = true;
            Some(n - 1)
        }
        _ => None,
    };

    let mut fresh = FreshNames::new(reserved);
    let mut names: Vec<Option<String>> = vec![None; n];
    let mut fresh_names = Vec::new();
    let mut statements = Vec::with_capacity(n);
    for k in 0..n {
        let mut text = instructions[k].source.clone();
        if let Some(j) = binder[k] {
            let name = names[j].clone().expect("a binder precedes its user and is already named");
            text = replace_underscores(&text, &name);
        }
        if need_name[k] {
            match leading_assignment(&text) {
                Some(name) => names[k] = Some(name),
                None => {
                    let name = fresh.next();
                    text = format!("{name} = {text}");
                    fresh_names.push(name.clone());
                    names[k] = Some(name);
                }
            }
        }
        statements.push(RewrittenStatement {
            instruction_index: instructions[k].index,
            text,
            errored: instructions[k].error.is_some(),
        });
    }

    let subject = subject_position.and_then(|p| names[p].clone());
    Ok(RewrittenBurst { statements, fresh_names, subject })
}

fn has_underscore(source: &str) -> bool {
    lex::tokenize(source)
        .iter()
        .any(|t| t.kind == TokenKind::Ident && t.text == "_")
}

fn replace_underscores(source: &str, name: &str) -> String {
    let mut out = source.to_string();
    for token in lex::tokenize(source).iter().rev() {
        if token.kind == TokenKind::Ident && token.text == "_" {
            out.replace_range(token.start..token.end, name);
        }
    }
    out
}

/// Cycles x, y, z, x2, y2, z2, ... skipping reserved names.
struct FreshNames<'a> {
    reserved: &'a HashSet<String>,
    counter: usize,
}

impl<'a> FreshNames<'a> {
    fn new(reserved: &'a HashSet<String>) -> FreshNames<'a> {
        FreshNames { reserved, counter: 0 }
    }

    fn next(&mut self) -> String {
        loop {
            let cycle = self.counter / 3;
            let base = ["x", "y", "z"][self.counter % 3];
            self.counter += 1;
            let name = if cycle == 0 {
                base.to_string()
            } else {
                format!("{base}{}", cycle + 1)
            };
            if !self.reserved.contains(&name) {
                return name;
            }
        }
    }
}

/// One burst, rewritten and filtered, ready for grouping.
#[derive(Debug, Clone)]
pub struct TestSeed {
    /// The full rewrite, errored statements included; grouping sees
    /// everything that happened.
    pub burst: RewrittenBurst,
    /// The statements that survive for emission.
    pub kept: Vec<RewrittenStatement>,
    pub assertion: Option<synthesis::Assertion>,
}

/// Facts over every rewritten statement of the given seeds. Grouping
/// expects facts built from exactly the seeds it is handed.
pub fn facts_for_seeds(seeds: &[TestSeed]) -> VariableFacts {
    let mut statements: Vec<(usize, &str)> = seeds
        .iter()
        .flat_map(|s| s.burst.statements.iter())
        .map(|s| (s.instruction_index, s.text.as_str()))
        .collect();
    statements.sort_by_key(|&(index, _)| index);
    VariableFacts::collect(statements)
}

/// Bursts grouped by the variables they share. `members` are positions
/// into the seed list; every member uses every name in `shared_vars`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGroup {
    pub shared_vars: Vec<String>,
    pub members: Vec<usize>,
}

/// The top-level grouping of seeds by their most-shared variable, after
/// variables common to all seeds are set aside. Seeds sharing nothing
/// come last as one group with no shared vars.
pub fn dependency_groups(seeds: &[TestSeed], facts: &VariableFacts) -> Vec<DependencyGroup> {
    let (grouping, avail, _) = Grouping::prepare(seeds, facts);
    let active: Vec<usize> = (0..seeds.len()).collect();
    let (_, _, cells, leaves) = grouping.stabilize(&active, &avail);
    let mut groups: Vec<DependencyGroup> = cells
        .into_iter()
        .map(|cell| DependencyGroup {
            shared_vars: cell.vars.iter().map(|v| v.display_name().to_string()).collect(),
            members: cell.members,
        })
        .collect();
    if !leaves.is_empty() {
        groups.push(DependencyGroup { shared_vars: Vec::new(), members: leaves });
    }
    groups
}

/// Builds the nested context tree for a set of seeds.
///
/// Recursively: definitions of variables used by every test in the
/// current group are hoisted into the group's setup; the remaining tests
/// are partitioned by their most-shared variable into child contexts;
/// tests sharing nothing become leaf tests. A variable whose users end
/// up split across sibling partitions is lifted into the current setup
/// instead, so every hoisted definition dominates all of its users.
/// Import statements are hoisted to the root.
pub fn build_context_tree(seeds: &[TestSeed], facts: &VariableFacts) -> ContextTree {
    let (mut grouping, avail, imports) = Grouping::prepare(seeds, facts);
    let active: Vec<usize> = (0..seeds.len()).collect();
    let mut root = grouping.build(&active, &avail);
    root.imports = imports;
    root
}

/// A variable as the grouper sees it. Names invented by the rewrite are
/// keyed by their burst, since every burst restarts the same x, y, z
/// sequence; a textual "x" in one burst has nothing to do with "x" in
/// another.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum VarKey {
    Named(String),
    Fresh { seed: usize, name: String },
}

impl VarKey {
    fn display_name(&self) -> &str {
        match self {
            VarKey::Named(name) => name,
            VarKey::Fresh { name, .. } => name,
        }
    }
}

struct Cell {
    /// Variables every member uses, in definition order.
    vars: Vec<VarKey>,
    /// Seed positions, ascending.
    members: Vec<usize>,
}

struct Grouping<'a> {
    seeds: &'a [TestSeed],
    /// Per seed: kept statements minus imports, as (index, text).
    bodies: Vec<Vec<(usize, String)>>,
    /// Seeds that depend on each variable, ascending, after closure:
    /// when a shared variable's definition reads another variable, that
    /// variable inherits the users, so its definition is hoisted high
    /// enough to stay in scope.
    users: BTreeMap<VarKey, Vec<usize>>,
    /// First non-errored defining statement per variable.
    kept_def: BTreeMap<VarKey, (usize, String)>,
    /// Instruction indices whose statements are hoisted somewhere.
    hoisted: HashSet<usize>,
    /// Instruction indices already emitted into some setup; a statement
    /// defining two variables must appear only once.
    emitted: HashSet<usize>,
}

impl<'a> Grouping<'a> {
    /// Derives the sharing structure: who uses what, which variables are
    /// shared, which statements are imports, which get hoisted.
    fn prepare(
        seeds: &'a [TestSeed],
        facts: &VariableFacts,
    ) -> (Grouping<'a>, Vec<VarKey>, Vec<String>) {
        let fresh_of: Vec<HashSet<&str>> = seeds
            .iter()
            .map(|s| s.burst.fresh_names.iter().map(String::as_str).collect())
            .collect();
        let fresh_anywhere: HashSet<&str> =
            fresh_of.iter().flat_map(|set| set.iter().copied()).collect();
        // An invented name resolves only within its own burst; the same
        // text elsewhere is a different variable (or, if that burst never
        // invented it, a stray reference worth ignoring).
        let resolve = |name: &str, seed: usize| -> Option<VarKey> {
            if fresh_of[seed].contains(name) {
                Some(VarKey::Fresh { seed, name: name.to_string() })
            } else if fresh_anywhere.contains(name) {
                None
            } else {
                Some(VarKey::Named(name.to_string()))
            }
        };

        let mut def_index: BTreeMap<VarKey, usize> = BTreeMap::new();
        let mut owner: BTreeMap<VarKey, usize> = BTreeMap::new();
        let mut kept_def: BTreeMap<VarKey, (usize, String)> = BTreeMap::new();
        let mut seed_uses: Vec<BTreeSet<VarKey>> = vec![BTreeSet::new(); seeds.len()];
        for (s, seed) in seeds.iter().enumerate() {
            for stmt in &seed.burst.statements {
                for def in facts.defs(stmt.instruction_index) {
                    if let Some(key) = resolve(def, s) {
                        def_index.entry(key.clone()).or_insert(stmt.instruction_index);
                        owner.entry(key).or_insert(s);
                    }
                }
                for used in facts.uses(stmt.instruction_index) {
                    if let Some(key) = resolve(used, s) {
                        seed_uses[s].insert(key);
                    }
                }
            }
            for stmt in &seed.kept {
                for def in facts.defs(stmt.instruction_index) {
                    if let Some(key) = resolve(def, s) {
                        kept_def
                            .entry(key)
                            .or_insert_with(|| (stmt.instruction_index, stmt.text.clone()));
                    }
                }
            }
            // Asserting on a variable is a use: the test must sit under
            // whatever context ends up defining its subject.
            if let Some(subject) = &seed.burst.subject {
                if let Some(key) = resolve(subject, s) {
                    seed_uses[s].insert(key);
                }
            }
        }

        let mut users: BTreeMap<VarKey, Vec<usize>> = BTreeMap::new();
        for (s, used) in seed_uses.iter().enumerate() {
            for key in used {
                users.entry(key.clone()).or_default().push(s);
            }
        }

        let mut var_order: Vec<VarKey> = def_index.keys().cloned().collect();
        var_order.sort_by_key(|v| (def_index[v], v.clone()));

        // Closure: a hoisted definition must find its own operands in
        // scope, so whatever it reads inherits its users. Runs to a
        // fixpoint because user sets only grow.
        loop {
            let mut changed = false;
            for v in &var_order {
                let v_users = users.get(v).cloned().unwrap_or_default();
                let own = owner.get(v).copied();
                if !v_users.iter().any(|&s| Some(s) != own) {
                    continue;
                }
                let Some(&(def_idx, _)) = kept_def.get(v) else { continue };
                let owner_seed = own.expect("a defined variable has an owning seed");
                for used in facts.uses(def_idx) {
                    if let Some(key) = resolve(used, owner_seed) {
                        if !def_index.contains_key(&key) {
                            continue;
                        }
                        if merge_sorted(users.entry(key).or_default(), &v_users) {
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let shared: Vec<VarKey> = var_order
            .iter()
            .filter(|v| {
                let own = owner.get(*v).copied();
                users
                    .get(*v)
                    .is_some_and(|us| us.iter().any(|&s| Some(s) != own))
            })
            .cloned()
            .collect();
        let hoisted: HashSet<usize> = shared
            .iter()
            .filter_map(|v| kept_def.get(v).map(|&(index, _)| index))
            .collect();

        let mut imports: Vec<String> = Vec::new();
        let mut import_indices: HashSet<usize> = HashSet::new();
        for seed in seeds {
            for stmt in &seed.kept {
                if is_import(&stmt.text) {
                    import_indices.insert(stmt.instruction_index);
                    if !imports.contains(&stmt.text) {
                        imports.push(stmt.text.clone());
                    }
                }
            }
        }

        let bodies: Vec<Vec<(usize, String)>> = seeds
            .iter()
            .map(|seed| {
                seed.kept
                    .iter()
                    .filter(|stmt| !import_indices.contains(&stmt.instruction_index))
                    .map(|stmt| (stmt.instruction_index, stmt.text.clone()))
                    .collect()
            })
            .collect();

        let grouping = Grouping {
            seeds,
            bodies,
            users,
            kept_def,
            hoisted,
            emitted: HashSet::new(),
        };
        (grouping, shared, imports)
    }

    fn uses_var(&self, v: &VarKey, seed: usize) -> bool {
        self.users.get(v).is_some_and(|us| us.binary_search(&seed).is_ok())
    }

    /// Splits a group into setup variables, leftover variables, child
    /// cells, and leaf tests, lifting any variable whose users span
    /// several cells until the split is consistent.
    fn stabilize(
        &self,
        active: &[usize],
        avail: &[VarKey],
    ) -> (Vec<VarKey>, Vec<VarKey>, Vec<Cell>, Vec<usize>) {
        let mut setup_vars: Vec<VarKey> = avail
            .iter()
            .filter(|v| active.iter().all(|&s| self.uses_var(v, s)))
            .cloned()
            .collect();
        let mut remaining: Vec<VarKey> =
            avail.iter().filter(|v| !setup_vars.contains(v)).cloned().collect();
        loop {
            let (cells, leaves) = self.partition(active, &remaining);
            let spanning = self.spanning(&remaining, &cells, &leaves);
            if spanning.is_empty() {
                return (setup_vars, remaining, cells, leaves);
            }
            setup_vars.extend(spanning.iter().cloned());
            remaining.retain(|v| !spanning.contains(v));
        }
    }

    /// Repeatedly peels off the seeds using the most-shared remaining
    /// variable (ties go to the earliest-defined). Seeds using none of
    /// the remaining variables are leaves.
    fn partition(&self, active: &[usize], remaining: &[VarKey]) -> (Vec<Cell>, Vec<usize>) {
        let mut rest = active.to_vec();
        let mut cells = Vec::new();
        loop {
            let mut best: Option<(usize, &VarKey)> = None;
            for v in remaining {
                let count = rest.iter().filter(|&&s| self.uses_var(v, s)).count();
                if count >= 1 && best.is_none_or(|(best_count, _)| count > best_count) {
                    best = Some((count, v));
                }
            }
            let Some((_, key)) = best else { break };
            let members: Vec<usize> =
                rest.iter().copied().filter(|&s| self.uses_var(key, s)).collect();
            let vars: Vec<VarKey> = remaining
                .iter()
                .filter(|v| members.iter().all(|&s| self.uses_var(v, s)))
                .cloned()
                .collect();
            rest.retain(|s| !members.contains(s));
            cells.push(Cell { vars, members });
        }
        (cells, rest)
    }

    /// Variables whose users land in two or more of the partition's
    /// pieces (the leaf group counts as one); their definitions must
    /// move up rather than into any single child.
    fn spanning(&self, remaining: &[VarKey], cells: &[Cell], leaves: &[usize]) -> Vec<VarKey> {
        remaining
            .iter()
            .filter(|v| {
                let mut places = 0;
                for cell in cells {
                    if cell.members.iter().any(|&s| self.uses_var(v, s)) {
                        places += 1;
                    }
                }
                if leaves.iter().any(|&s| self.uses_var(v, s)) {
                    places += 1;
                }
                places >= 2
            })
            .cloned()
            .collect()
    }

    fn build(&mut self, active: &[usize], avail: &[VarKey]) -> ContextTree {
        let (setup_vars, remaining, cells, leaves) = self.stabilize(active, avail);

        let mut setup_statements: Vec<(usize, String)> = setup_vars
            .iter()
            .filter_map(|v| self.kept_def.get(v).cloned())
            .collect();
        setup_statements.sort_by_key(|&(index, _)| index);
        let mut setup = Vec::new();
        for (index, text) in setup_statements {
            if self.emitted.insert(index) {
                setup.push(text);
            }
        }

        let mut children = Vec::new();
        for cell in &cells {
            children.push(self.build(&cell.members, &remaining));
        }
        let tests: Vec<TestCase> = leaves.iter().map(|&s| self.leaf_test(s)).collect();

        let mut node = ContextTree {
            name: String::new(),
            imports: Vec::new(),
            setup,
            children,
            tests,
        };
        let mut statements: Vec<&str> = Vec::new();
        gather_statements(&node, &mut statements);
        node.name = synthesis::name_context(&statements);
        node
    }

    fn leaf_test(&self, seed: usize) -> TestCase {
        let statements: Vec<String> = self.bodies[seed]
            .iter()
            .filter(|(index, _)| !self.hoisted.contains(index))
            .map(|(_, text)| text.clone())
            .collect();
        let assertion = self.seeds[seed].assertion.clone();
        TestCase {
            name: synthesis::name_test(&statements),
            smoke: assertion.is_none(),
            statements,
            assertion,
        }
    }
}

fn gather_statements<'t>(node: &'t ContextTree, out: &mut Vec<&'t str>) {
    out.extend(node.setup.iter().map(String::as_str));
    for child in &node.children {
        gather_statements(child, out);
    }
    for test in &node.tests {
        out.extend(test.statements.iter().map(String::as_str));
    }
}

fn merge_sorted(dst: &mut Vec<usize>, src: &[usize]) -> bool {
    let mut changed = false;
    for &s in src {
        if let Err(pos) = dst.binary_search(&s) {
            dst.insert(pos, s);
            changed = true;
        }
    }
    changed
}

fn is_import(text: &str) -> bool {
    matches!(
        lex::tokenize(text).first(),
        Some(first)
            if first.kind == TokenKind::Ident
                && (first.text == "require" || first.text == "import")
    )
}
