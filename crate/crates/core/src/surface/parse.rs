use super::ParseError;
use crate::rules::{Define, DynamicSignature, Label, LabelId, Premise, Rule, SCHEMATIC_HEAD};
use crate::syntax::{
    coerce, weaken, ArgSpec, BindingSignature, Context, MetaId, MetaVar, OpKind, Operator, SortId, SortTable, Term,
};

#[derive(Clone, Debug)]
enum Ast {
    Name {
        name: String,
        pos: usize,
    },
    Var {
        sort: Option<String>,
        index: u32,
        pos: usize,
    },
    Meta {
        name: String,
        args: Option<Vec<Ast>>,
        pos: usize,
    },
    App {
        op: String,
        annot: Option<String>,
        args: Vec<ArgAst>,
        pos: usize,
    },
    Wild {
        pos: usize,
    },
}

impl Ast {
    fn pos(&self) -> usize {
        match self {
            Ast::Name { pos, .. }
            | Ast::Var { pos, .. }
            | Ast::Meta { pos, .. }
            | Ast::App { pos, .. }
            | Ast::Wild { pos } => *pos,
        }
    }
}

#[derive(Clone, Debug)]
struct ArgAst {
    binders: Vec<String>,
    body: Ast,
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

impl Cursor {
    fn new(text: &str, line: usize) -> Self {
        Cursor {
            chars: text.chars().collect(),
            pos: 0,
            line,
        }
    }

    fn err_at(&self, pos: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: pos + 1,
            message: message.into(),
        }
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        self.err_at(self.pos, message)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.chars.len()
    }

    fn looking_at(&mut self, s: &str) -> bool {
        self.skip_ws();
        let n = s.chars().count();
        self.chars.len() >= self.pos + n && self.chars[self.pos..self.pos + n].iter().copied().eq(s.chars())
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.looking_at(s) {
            self.pos += s.chars().count();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{s}`")))
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        let save = self.pos;
        if self.eat(kw) && !self.peek().is_some_and(is_ident_char) {
            return true;
        }
        self.pos = save;
        false
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        if !self.peek().is_some_and(is_ident_start) {
            return Err(self.err("expected an identifier"));
        }
        let start = self.pos;
        while self.peek().is_some_and(is_ident_char) {
            self.pos += 1;
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn number(&mut self) -> Result<u32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a number"));
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse().map_err(|_| self.err_at(start, "number out of range"))
    }

    /// A maximal run of characters satisfying `keep`, after whitespace.
    fn word(&mut self, keep: impl Fn(char) -> bool) -> Result<(String, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(&keep) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a name"));
        }
        Ok((self.chars[start..self.pos].iter().collect(), start))
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        self.skip_ws();
        let pos = self.pos;
        match self.peek() {
            Some('?') => {
                self.pos += 1;
                let name = self.ident()?;
                let args = if self.peek() == Some('(') {
                    self.pos += 1;
                    let mut args = Vec::new();
                    if !self.eat(")") {
                        loop {
                            args.push(self.term()?);
                            if self.eat(")") {
                                break;
                            }
                            self.expect(",")?;
                        }
                    }
                    Some(args)
                } else {
                    None
                };
                Ok(Ast::Meta { name, args, pos })
            }
            Some('(') => {
                self.pos += 1;
                let t = self.term()?;
                self.expect(")")?;
                Ok(t)
            }
            Some(c) if is_ident_start(c) => {
                let name = self.ident()?;
                if name == "_" {
                    return Ok(Ast::Wild { pos });
                }
                if name == "var" {
                    let sort = if self.peek() == Some('@') {
                        self.pos += 1;
                        Some(self.ident()?)
                    } else {
                        None
                    };
                    let index = self.number()?;
                    return Ok(Ast::Var { sort, index, pos });
                }
                let annot = if self.peek() == Some('@') {
                    self.pos += 1;
                    Some(self.ident()?)
                } else {
                    None
                };
                if self.peek() == Some('(') {
                    self.pos += 1;
                    let mut args = Vec::new();
                    if !self.eat(")") {
                        loop {
                            args.push(self.arg()?);
                            if self.eat(")") {
                                break;
                            }
                            self.expect(",")?;
                        }
                    }
                    Ok(Ast::App {
                        op: name,
                        annot,
                        args,
                        pos,
                    })
                } else if annot.is_some() {
                    Ok(Ast::App {
                        op: name,
                        annot,
                        args: Vec::new(),
                        pos,
                    })
                } else {
                    Ok(Ast::Name { name, pos })
                }
            }
            _ => Err(self.err("expected a term")),
        }
    }

    fn arg(&mut self) -> Result<ArgAst, ParseError> {
        let save = self.pos;
        let mut binders = Vec::new();
        loop {
            self.skip_ws();
            if !self.peek().is_some_and(is_ident_start) {
                break;
            }
            let before = self.pos;
            let id = self.ident()?;
            if id == "var" || id == "_" {
                self.pos = before;
                break;
            }
            binders.push(id);
        }
        self.skip_ws();
        if !binders.is_empty() && self.peek() == Some('.') {
            self.pos += 1;
        } else {
            self.pos = save;
            binders.clear();
        }
        Ok(ArgAst {
            binders,
            body: self.term()?,
        })
    }

    fn context(&mut self, sorts: &SortTable) -> Result<Context, ParseError> {
        let mut counts = vec![0u32; sorts.len()];
        loop {
            self.skip_ws();
            let pos = self.pos;
            let n = self.number()?;
            self.skip_ws();
            let sort = if self.peek().is_some_and(is_ident_start) {
                let save = self.pos;
                let name = self.ident()?;
                match sorts.lookup(&name) {
                    Ok(s) => Some(s),
                    Err(_) => {
                        self.pos = save;
                        None
                    }
                }
            } else {
                None
            };
            match sort {
                Some(s) => counts[s.index()] += n,
                None if n == 0 => {}
                None if sorts.len() == 1 => counts[0] += n,
                None => return Err(self.err_at(pos, "context entries need a sort in multi-sorted signatures")),
            }
            let save = self.pos;
            if self.eat("+") {
                continue;
            }
            self.pos = save;
            return Ok(Context::from_counts(counts));
        }
    }
}

type Scope = Vec<(String, SortId, u32)>;

struct Elab<'a> {
    dsig: &'a DynamicSignature,
    metas: &'a [MetaVar],
    schematic: bool,
    line: usize,
    defines_visible: usize,
}

impl<'a> Elab<'a> {
    fn new(dsig: &'a DynamicSignature, metas: &'a [MetaVar], line: usize) -> Self {
        Elab {
            dsig,
            metas,
            schematic: false,
            line,
            defines_visible: dsig.defines.len(),
        }
    }

    fn sig(&self) -> &BindingSignature {
        &self.dsig.binding
    }

    fn err(&self, pos: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: pos + 1,
            message: message.into(),
        }
    }

    fn sort(&self, name: &str, pos: usize) -> Result<SortId, ParseError> {
        self.sig().sorts.lookup(name).map_err(|e| self.err(pos, e.to_string()))
    }

    fn lift(&self, t: Term, found: SortId, expected: SortId, pos: usize) -> Result<Term, ParseError> {
        if found == expected {
            return Ok(t);
        }
        let sorts = &self.sig().sorts;
        if !sorts.coerces(found, expected) {
            return Err(self.err(
                pos,
                format!(
                    "expected a term of sort {}, found sort {}",
                    sorts.name(expected),
                    sorts.name(found)
                ),
            ));
        }
        coerce(self.sig(), t, found, expected).map_err(|e| self.err(pos, e.to_string()))
    }

    fn annotation(
        &self,
        op: crate::syntax::OpId,
        explicit: Option<&str>,
        expected: SortId,
        pos: usize,
    ) -> Result<SortId, ParseError> {
        let inst = self.sig().instantiations(op);
        match explicit {
            Some(name) => {
                let s = self.sort(name, pos)?;
                if inst.contains(&s) {
                    Ok(s)
                } else {
                    Err(self.err(
                        pos,
                        format!("operator `{}` cannot be annotated {name}", self.sig().op(op).name),
                    ))
                }
            }
            None if inst.contains(&expected) => Ok(expected),
            None => Ok(self.sig().op(op).result_sort),
        }
    }

    fn meta(&self, name: &str, pos: usize) -> Result<MetaId, ParseError> {
        self.metas
            .iter()
            .position(|m| m.name == name)
            .map(|i| MetaId(i as u16))
            .ok_or_else(|| {
                self.err(
                    pos,
                    format!("unknown metavariable `?{name}` (not introduced by any pattern)"),
                )
            })
    }

    fn term(&self, ast: &Ast, expected: SortId, ctx: &Context, scope: &mut Scope) -> Result<Term, ParseError> {
        let sig = self.sig();
        match ast {
            Ast::Name { name, pos } => {
                if let Some((_, s, lvl)) = scope.iter().rev().find(|(n, _, _)| n == name) {
                    return self.lift(Term::var(*s, *lvl), *s, expected, *pos);
                }
                if let Some(d) = self.dsig.defines[..self.defines_visible]
                    .iter()
                    .find(|d| &d.name == name)
                {
                    // defines are closed; their binders sit above the current scope
                    let t = weaken(&d.term, &sig.empty_ctx(), ctx);
                    return self.lift(t, d.sort, expected, *pos);
                }
                if sig.lookup_op(name).is_some() {
                    let app = Ast::App {
                        op: name.clone(),
                        annot: None,
                        args: Vec::new(),
                        pos: *pos,
                    };
                    return self.term(&app, expected, ctx, scope);
                }
                Err(self.err(*pos, format!("unbound name `{name}`")))
            }
            Ast::Var { sort, index, pos } => {
                let s = match sort {
                    Some(n) => self.sort(n, *pos)?,
                    None => SortId(0),
                };
                if *index == 0 || *index > ctx.count(s) {
                    return Err(self.err(
                        *pos,
                        format!(
                            "variable {index} of sort {} not in context {}",
                            sig.sorts.name(s),
                            ctx.render(&sig.sorts)
                        ),
                    ));
                }
                self.lift(Term::var(s, *index), s, expected, *pos)
            }
            Ast::Wild { pos } => {
                if !self.schematic {
                    return Err(self.err(*pos, "wildcard `_` is only allowed in schematic rules"));
                }
                let decl = &self.metas[0];
                if !decl.params.is_prefix_of(ctx) {
                    return Err(self.err(*pos, "schematic head used outside its context"));
                }
                self.lift(
                    Term::meta(MetaId(0), decl.params.var_terms()),
                    decl.sort,
                    expected,
                    *pos,
                )
            }
            Ast::Meta { name, args, pos } => {
                let m = self.meta(name, *pos)?;
                let decl = &self.metas[m.index()];
                let args = match args {
                    None => {
                        if !decl.params.is_prefix_of(ctx) {
                            return Err(self.err(
                                *pos,
                                format!("`?{name}` needs explicit arguments outside its parameter context"),
                            ));
                        }
                        decl.params.var_terms()
                    }
                    Some(args) => {
                        let params: Vec<(SortId, u32)> = decl.params.vars().collect();
                        if params.len() != args.len() {
                            return Err(self.err(
                                *pos,
                                format!("`?{name}` takes {} arguments, found {}", params.len(), args.len()),
                            ));
                        }
                        params
                            .iter()
                            .zip(args)
                            .map(|((s, _), a)| self.term(a, *s, ctx, scope))
                            .collect::<Result<_, _>>()?
                    }
                };
                self.lift(Term::meta(m, args), decl.sort, expected, *pos)
            }
            Ast::App { op, annot, args, pos } => {
                let id = sig
                    .lookup_op(op)
                    .ok_or_else(|| self.err(*pos, format!("unknown operator `{op}`")))?;
                let o = sig.op(id);
                if o.args.len() != args.len() {
                    return Err(self.err(
                        *pos,
                        format!("operator `{op}` takes {} arguments, found {}", o.args.len(), args.len()),
                    ));
                }
                let s = self.annotation(id, annot.as_deref(), expected, *pos)?;
                let mut out = Vec::new();
                for (i, (spec, a)) in o.args.iter().zip(args).enumerate() {
                    let binds: Vec<(SortId, u32)> = spec.binds.vars().collect();
                    if a.binders.len() != binds.len() {
                        return Err(self.err(
                            a.body.pos(),
                            format!(
                                "argument {} of `{op}` binds {} variables, found {} binder names",
                                i + 1,
                                binds.len(),
                                a.binders.len()
                            ),
                        ));
                    }
                    let mark = scope.len();
                    for (name, (bs, j)) in a.binders.iter().zip(&binds) {
                        scope.push((name.clone(), *bs, ctx.count(*bs) + j));
                    }
                    let inner = ctx.extend(&spec.binds);
                    let t = self.term(&a.body, sig.arg_sort(id, s, i), &inner, scope);
                    scope.truncate(mark);
                    out.push(t?);
                }
                self.lift(Term::op(id, s, out), s, expected, *pos)
            }
        }
    }

    /// Declares the metavariables introduced by a pattern: a bare `?k` in a
    /// position of sort `s` over context `ctx` gets parameters `ctx`.
    fn declare(&self, ast: &Ast, expected: SortId, ctx: &Context, metas: &mut Vec<MetaVar>) -> Result<(), ParseError> {
        match ast {
            Ast::Meta { name, args: None, .. } => {
                if !metas.iter().any(|m| &m.name == name) {
                    metas.push(MetaVar {
                        name: name.clone(),
                        params: ctx.clone(),
                        sort: expected,
                    });
                }
                Ok(())
            }
            Ast::App { op, annot, args, pos } => {
                let sig = self.sig();
                let Some(id) = sig.lookup_op(op) else {
                    return Err(self.err(*pos, format!("unknown operator `{op}`")));
                };
                let s = self.annotation(id, annot.as_deref(), expected, *pos)?;
                let o = sig.op(id);
                for (i, (spec, a)) in o.args.iter().zip(args).enumerate() {
                    self.declare(&a.body, sig.arg_sort(id, s, i), &ctx.extend(&spec.binds), metas)?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

struct RuleAst {
    name: String,
    head: Ast,
    premises: Vec<(Ast, String, usize, Ast)>,
    label: String,
    label_pos: usize,
    target: Ast,
}

fn is_label_char(c: char) -> bool {
    !c.is_whitespace() && c != '=' && c != ':' && c != ','
}

fn rule_ast(cur: &mut Cursor) -> Result<RuleAst, ParseError> {
    let (name, _) = cur.word(|c| c != ':' && !c.is_whitespace())?;
    cur.expect(":")?;
    let head = cur.term()?;
    let mut premises = Vec::new();
    if cur.eat_keyword("with") {
        loop {
            let src = cur.term()?;
            cur.expect("=")?;
            let (label, pos) = cur.word(is_label_char)?;
            cur.expect("=>")?;
            let tgt = cur.term()?;
            premises.push((src, label, pos, tgt));
            if !cur.eat(",") {
                break;
            }
        }
    }
    if !cur.eat_keyword("gives") {
        return Err(cur.err("expected `gives`"));
    }
    let (label, label_pos) = cur.word(is_label_char)?;
    let target = cur.term()?;
    if !cur.at_end() {
        return Err(cur.err("unexpected trailing input"));
    }
    Ok(RuleAst {
        name,
        head,
        premises,
        label,
        label_pos,
        target,
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum RuleKind {
    Rigid,
    Schematic,
    Howe,
}

fn build_rule(dsig: &DynamicSignature, ra: &RuleAst, kind: RuleKind, line: usize) -> Result<Rule, ParseError> {
    let err = |pos: usize, message: String| ParseError {
        line,
        column: pos + 1,
        message,
    };
    let label_of = |name: &str, pos: usize| -> Result<LabelId, ParseError> {
        dsig.lookup_label(name)
            .ok_or_else(|| err(pos, format!("unknown label `{name}`")))
    };
    let concl = label_of(&ra.label, ra.label_pos)?;
    let cl = dsig.label(concl);
    let mut metas = Vec::new();
    if kind == RuleKind::Schematic {
        if !matches!(ra.head, Ast::Wild { .. }) {
            return Err(err(
                ra.head.pos(),
                "a schematic rule's conclusion source must be `_`".to_string(),
            ));
        }
        metas.push(MetaVar {
            name: SCHEMATIC_HEAD.to_string(),
            params: cl.source_ctx.clone(),
            sort: cl.source_sort,
        });
    }
    let probe = Elab::new(dsig, &[], line);
    probe.declare(&ra.head, cl.source_sort, &cl.source_ctx, &mut metas)?;
    let mut labels = Vec::new();
    for (_, name, pos, tgt) in &ra.premises {
        let l = label_of(name, *pos)?;
        let lab = dsig.label(l);
        probe.declare(tgt, lab.target_sort, &lab.target_ctx, &mut metas)?;
        labels.push(l);
    }
    let mut elab = Elab::new(dsig, &metas, line);
    elab.schematic = kind == RuleKind::Schematic;
    let source = elab.term(&ra.head, cl.source_sort, &cl.source_ctx, &mut Vec::new())?;
    let mut premises = Vec::new();
    for ((src, _, _, tgt), l) in ra.premises.iter().zip(labels) {
        let lab = dsig.label(l);
        premises.push(Premise {
            source: elab.term(src, lab.source_sort, &lab.source_ctx, &mut Vec::new())?,
            label: l,
            target: elab.term(tgt, lab.target_sort, &lab.target_ctx, &mut Vec::new())?,
        });
    }
    let target = elab.term(&ra.target, cl.target_sort, &cl.target_ctx, &mut Vec::new())?;
    Ok(Rule {
        name: ra.name.clone(),
        metas: metas.clone(),
        source,
        premises,
        label: concl,
        target,
    })
}

fn op_decl(cur: &mut Cursor, sig: &BindingSignature) -> Result<Operator, ParseError> {
    let name = cur.ident()?;
    cur.expect(":")?;
    cur.expect("(")?;
    let mut args = Vec::new();
    if !cur.eat(")") {
        loop {
            cur.skip_ws();
            let pos = cur.pos;
            let s = cur.ident()?;
            let sort = sig.sorts.lookup(&s).map_err(|e| cur.err_at(pos, e.to_string()))?;
            let binds = if cur.eat("[") {
                let c = cur.context(&sig.sorts)?;
                cur.expect("]")?;
                c
            } else {
                sig.empty_ctx()
            };
            args.push(ArgSpec { sort, binds });
            if cur.eat(")") {
                break;
            }
            cur.expect(",")?;
        }
    }
    cur.expect("->")?;
    cur.skip_ws();
    let pos = cur.pos;
    let r = cur.ident()?;
    let result_sort = sig.sorts.lookup(&r).map_err(|e| cur.err_at(pos, e.to_string()))?;
    let kind = if cur.eat_keyword("program") {
        OpKind::Program
    } else if cur.eat_keyword("value") {
        let pos = cur.pos;
        let active = cur.number()? as usize;
        let passive = cur.number()? as usize;
        cur.expect("d-=(")?;
        let mut depths = Vec::new();
        if !cur.eat(")") {
            loop {
                depths.push(cur.number()?);
                if cur.eat(")") {
                    break;
                }
                cur.expect(",")?;
            }
        }
        if active + passive != args.len() || depths.len() != passive {
            return Err(cur.err_at(
                pos,
                format!("value operator `{name}`: N+ + N- and d- must match its arguments"),
            ));
        }
        for (spec, d) in args[active..].iter().zip(&depths) {
            if spec.binds != Context::single(sig.n_sorts(), sig.binding_sort, *d) {
                return Err(cur.err_at(
                    pos,
                    format!("value operator `{name}`: passive arguments must bind d- variables at the binding sort"),
                ));
            }
        }
        OpKind::Value { active }
    } else {
        OpKind::Plain
    };
    if !cur.at_end() {
        return Err(cur.err("unexpected trailing input"));
    }
    Ok(Operator {
        name,
        result_sort,
        args,
        kind,
    })
}

fn sort_at_ctx(cur: &mut Cursor, sorts: &SortTable) -> Result<(SortId, Context), ParseError> {
    cur.skip_ws();
    let pos = cur.pos;
    let s = cur.ident()?;
    let sort = sorts.lookup(&s).map_err(|e| cur.err_at(pos, e.to_string()))?;
    cur.expect("@")?;
    Ok((sort, cur.context(sorts)?))
}

/// Parses a signature file.
pub fn parse_signature(text: &str) -> Result<DynamicSignature, ParseError> {
    let mut sorts = SortTable::new(Vec::<String>::new()).expect("empty table");
    let mut binding: Option<SortId> = None;
    let mut dsig: Option<DynamicSignature> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut cur = Cursor::new(content, line);
        if cur.at_end() {
            continue;
        }
        let (kw, kw_pos) = cur.word(|c| !c.is_whitespace())?;
        let lift = |cur: &Cursor, e: &dyn std::fmt::Display| cur.err_at(kw_pos, e.to_string());
        match kw.as_str() {
            "sort" | "coerce" | "binding" => {
                if dsig.is_some() {
                    return Err(cur.err_at(kw_pos, "sort declarations must precede operators"));
                }
                match kw.as_str() {
                    "sort" => {
                        let n = cur.ident()?;
                        sorts.add_sort(n).map_err(|e| lift(&cur, &e))?;
                    }
                    "coerce" => {
                        let a = cur.ident()?;
                        cur.expect("->")?;
                        let b = cur.ident()?;
                        let a = sorts.lookup(&a).map_err(|e| lift(&cur, &e))?;
                        let b = sorts.lookup(&b).map_err(|e| lift(&cur, &e))?;
                        sorts.add_coercion(a, b).map_err(|e| lift(&cur, &e))?;
                    }
                    _ => {
                        let n = cur.ident()?;
                        binding = Some(sorts.lookup(&n).map_err(|e| lift(&cur, &e))?);
                    }
                }
                if !cur.at_end() {
                    return Err(cur.err("unexpected trailing input"));
                }
            }
            _ => {
                if sorts.is_empty() {
                    return Err(cur.err_at(kw_pos, "no sorts declared"));
                }
                let d = dsig.get_or_insert_with(|| {
                    DynamicSignature::new(BindingSignature::new(sorts.clone(), binding.unwrap_or(SortId(0))))
                });
                match kw.as_str() {
                    "op" => {
                        let op = op_decl(&mut cur, &d.binding)?;
                        d.binding.add_op(op).map_err(|e| lift(&cur, &e))?;
                    }
                    "label" => {
                        let (name, _) = cur.word(|c| !c.is_whitespace() && c != ':')?;
                        cur.expect(":")?;
                        let (ss, sc) = sort_at_ctx(&mut cur, &d.binding.sorts)?;
                        cur.expect("->")?;
                        let (ts, tc) = sort_at_ctx(&mut cur, &d.binding.sorts)?;
                        if !cur.at_end() {
                            return Err(cur.err("unexpected trailing input"));
                        }
                        d.add_label(Label {
                            name,
                            source_sort: ss,
                            source_ctx: sc,
                            target_sort: ts,
                            target_ctx: tc,
                        })
                        .map_err(|e| lift(&cur, &e))?;
                    }
                    "define" => {
                        let name = cur.ident()?;
                        cur.expect(":")?;
                        cur.skip_ws();
                        let pos = cur.pos;
                        let s = cur.ident()?;
                        let sort = d.binding.sorts.lookup(&s).map_err(|e| cur.err_at(pos, e.to_string()))?;
                        cur.expect("=")?;
                        let ast = cur.term()?;
                        if !cur.at_end() {
                            return Err(cur.err("unexpected trailing input"));
                        }
                        if d.define(&name).is_some() {
                            return Err(cur.err_at(kw_pos, format!("duplicate define `{name}`")));
                        }
                        let term = Elab::new(d, &[], line).term(&ast, sort, &d.binding.empty_ctx(), &mut Vec::new())?;
                        d.defines.push(Define { name, sort, term });
                    }
                    "rule" | "schematic-rule" | "howe-rule" => {
                        let kind = match kw.as_str() {
                            "rule" => RuleKind::Rigid,
                            "schematic-rule" => RuleKind::Schematic,
                            _ => RuleKind::Howe,
                        };
                        let ra = rule_ast(&mut cur)?;
                        let rule = build_rule(d, &ra, kind, line)?;
                        match kind {
                            RuleKind::Rigid => d.rules.push(rule),
                            RuleKind::Schematic => d.schematic_rules.push(rule),
                            RuleKind::Howe => d.howe_rules.push(rule),
                        }
                    }
                    other => return Err(cur.err_at(kw_pos, format!("unknown declaration `{other}`"))),
                }
            }
        }
    }
    dsig.ok_or(ParseError {
        line: 1,
        column: 1,
        message: "empty signature".to_string(),
    })
}

/// Parses a closed term of `sort`.
pub fn parse_term(dsig: &DynamicSignature, text: &str, sort: SortId) -> Result<Term, ParseError> {
    parse_term_in(dsig, text, sort, &dsig.binding.empty_ctx())
}

/// Parses a term of `sort` over `ctx`; free variables are written `var N`.
pub fn parse_term_in(dsig: &DynamicSignature, text: &str, sort: SortId, ctx: &Context) -> Result<Term, ParseError> {
    let mut cur = Cursor::new(text, 1);
    let ast = cur.term()?;
    if !cur.at_end() {
        return Err(cur.err("unexpected trailing input"));
    }
    Elab::new(dsig, &[], 1).term(&ast, sort, ctx, &mut Vec::new())
}

/// Parses a context such as `1 v + 2 p`, `0`, or `2` (single-sorted).
pub fn parse_context(sorts: &SortTable, text: &str) -> Result<Context, ParseError> {
    let mut cur = Cursor::new(text, 1);
    let c = cur.context(sorts)?;
    if !cur.at_end() {
        return Err(cur.err("unexpected trailing input"));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::load_instance;

    #[test]
    fn identity_parses_to_level_one() {
        let dsig = load_instance("cbn").unwrap();
        let t = parse_term(&dsig, "lam(x. x)", SortId(0)).unwrap();
        let lam = dsig.binding.lookup_op("lam").unwrap();
        assert_eq!(t, Term::op(lam, SortId(0), vec![Term::var(SortId(0), 1)]));
        // alpha-equivalent spellings coincide
        assert_eq!(t, parse_term(&dsig, "lam(y. y)", SortId(0)).unwrap());
    }

    #[test]
    fn defines_are_placed_under_binders() {
        let dsig = load_instance("cbn").unwrap();
        let t = parse_term(&dsig, "lam(x. I)", SortId(0)).unwrap();
        let lam = dsig.binding.lookup_op("lam").unwrap();
        let inner = Term::op(lam, SortId(0), vec![Term::var(SortId(0), 2)]);
        assert_eq!(t, Term::op(lam, SortId(0), vec![inner]));
    }

    #[test]
    fn shadowing_resolves_innermost() {
        let dsig = load_instance("cbn").unwrap();
        let a = parse_term(&dsig, "lam(x. lam(x. x))", SortId(0)).unwrap();
        let b = parse_term(&dsig, "lam(x. lam(y. y))", SortId(0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn value_variable_is_coerced_in_program_position() {
        let dsig = load_instance("cbv").unwrap();
        let p = dsig.binding.sorts.lookup("p").unwrap();
        let v = dsig.binding.sorts.lookup("v").unwrap();
        let t = parse_term(&dsig, "lam(x. x)", p).unwrap();
        let Term::Op { args, sort, .. } = &t else { panic!() };
        assert_eq!(*sort, p);
        assert_eq!(
            args[0],
            Term::Coerce {
                from: v,
                to: p,
                body: Box::new(Term::var(v, 1))
            }
        );
    }

    #[test]
    fn located_errors() {
        let dsig = load_instance("cbn").unwrap();
        let e = parse_term(&dsig, "lam(x. y)", SortId(0)).unwrap_err();
        assert_eq!((e.line, e.column), (1, 8));
        let e = parse_signature("sort p\nop lam : (q[1]) -> p\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.message.contains("unknown sort"));
    }

    #[test]
    fn free_variables_are_checked_against_the_context() {
        let dsig = load_instance("cbn").unwrap();
        assert!(parse_term(&dsig, "var 1", SortId(0)).is_err());
        let ctx = Context::from_counts(vec![1]);
        assert_eq!(
            parse_term_in(&dsig, "var 1", SortId(0), &ctx).unwrap(),
            Term::var(SortId(0), 1)
        );
    }

    #[test]
    fn contexts() {
        let t = SortTable::howe();
        assert_eq!(parse_context(&t, "1 v + 2 p").unwrap().counts(), &[1, 2]);
        assert_eq!(parse_context(&t, "0").unwrap().counts(), &[0, 0]);
        assert!(parse_context(&t, "2").is_err());
        assert_eq!(parse_context(&SortTable::single("p"), "2").unwrap().counts(), &[2]);
    }
}
