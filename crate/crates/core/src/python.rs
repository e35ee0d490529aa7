//! A small Python front end: a tokenizer that understands strings, comments,
//! bracket nesting and line continuations, and a block scanner that recovers
//! `try` statements together with the byte offsets the instrumenter and the
//! stretcher need to edit them.
//!
//! It is not a full grammar. It validates exactly what it has to in order to
//! find block boundaries safely (indentation, bracket balance, string
//! termination, clause placement) and rejects everything else it cannot model.

use std::ops::Range;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl SyntaxError {
    fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        SyntaxError {
            line,
            col,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TokenKind {
    Name,
    Number,
    Str,
    Op,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub kind: TokenKind,
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub col: usize,
    pub end_line: usize,
    pub end_col: usize,
    /// Bracket nesting level the token sits at. Matching brackets share it.
    pub depth: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct LogicalLine {
    pub tokens: Vec<Token>,
    /// Indentation width, tabs expanded to multiples of eight.
    pub indent: usize,
    pub line_start: usize,
    pub indent_end: usize,
    /// Offset just past the newline that terminates the logical line.
    pub end_offset: usize,
}

impl LogicalLine {
    fn first_is(&self, src: &str, word: &str) -> bool {
        self.tokens
            .first()
            .is_some_and(|t| t.kind == TokenKind::Name && &src[t.start..t.end] == word)
    }

    fn opens_block(&self, src: &str) -> bool {
        self.tokens
            .last()
            .is_some_and(|t| t.kind == TokenKind::Op && t.depth == 0 && &src[t.start..t.end] == ":")
    }
}

struct Lexer<'a> {
    text: &'a str,
    src: &'a [u8],
    pos: usize,
    line: usize,
    line_start: usize,
}

impl<'a> Lexer<'a> {
    fn col_of(&self, offset: usize) -> usize {
        self.text[self.line_start..offset].chars().count()
    }

    fn newline_len(&self, at: usize) -> Option<usize> {
        match self.src.get(at) {
            Some(b'\n') => Some(1),
            Some(b'\r') if self.src.get(at + 1) == Some(&b'\n') => Some(2),
            Some(b'\r') => Some(1),
            _ => None,
        }
    }

    /// Consumes a newline at `pos`, advancing the line counters.
    fn eat_newline(&mut self) -> bool {
        match self.newline_len(self.pos) {
            Some(n) => {
                self.pos += n;
                self.line += 1;
                self.line_start = self.pos;
                true
            }
            None => false,
        }
    }

    fn string(&mut self, start: usize) -> Result<(), SyntaxError> {
        let (line, col) = (self.line, self.col_of(start));
        let quote = self.src[self.pos];
        let triple = self.src[self.pos..].starts_with(&[quote, quote, quote]);
        self.pos += if triple { 3 } else { 1 };
        loop {
            let Some(&c) = self.src.get(self.pos) else {
                return Err(SyntaxError::new(line, col, "unterminated string literal"));
            };
            if c == b'\\' {
                self.pos += 1;
                if !self.eat_newline() && self.pos < self.src.len() {
                    self.pos += 1;
                }
                continue;
            }
            if self.newline_len(self.pos).is_some() {
                if !triple {
                    return Err(SyntaxError::new(line, col, "unterminated string literal"));
                }
                self.eat_newline();
                continue;
            }
            if c == quote {
                if !triple {
                    self.pos += 1;
                    return Ok(());
                }
                if self.src[self.pos..].starts_with(&[quote, quote, quote]) {
                    self.pos += 3;
                    return Ok(());
                }
            }
            self.pos += 1;
        }
    }
}

fn is_ident_start(c: u8) -> bool {
    c == b'_' || c.is_ascii_alphabetic() || c >= 0x80
}

fn is_ident_char(c: u8) -> bool {
    is_ident_start(c) || c.is_ascii_digit()
}

fn is_string_prefix(word: &str) -> bool {
    matches!(
        word.to_ascii_lowercase().as_str(),
        "r" | "u" | "b" | "f" | "br" | "rb" | "fr" | "rf"
    )
}

/// Splits `text` into logical lines. Blank and comment-only lines produce none.
pub(crate) fn logical_lines(text: &str) -> Result<Vec<LogicalLine>, SyntaxError> {
    let mut lx = Lexer {
        text,
        src: text.as_bytes(),
        pos: 0,
        line: 1,
        line_start: 0,
    };
    let len = lx.src.len();
    let mut lines = Vec::new();
    let mut cur: Option<LogicalLine> = None;
    let mut brackets: Vec<(u8, usize, usize)> = Vec::new();

    loop {
        if cur.is_none() {
            let line_start = lx.pos;
            let mut width = 0;
            while let Some(&c) = lx.src.get(lx.pos) {
                match c {
                    b' ' => width += 1,
                    b'\t' => width = (width / 8 + 1) * 8,
                    b'\x0c' => width = 0,
                    _ => break,
                }
                lx.pos += 1;
            }
            if lx.pos >= len {
                break;
            }
            if lx.src[lx.pos] == b'#' {
                while lx.pos < len && lx.newline_len(lx.pos).is_none() {
                    lx.pos += 1;
                }
            }
            if lx.pos >= len {
                break;
            }
            if lx.eat_newline() {
                continue;
            }
            cur = Some(LogicalLine {
                tokens: Vec::new(),
                indent: width,
                line_start,
                indent_end: lx.pos,
                end_offset: len,
            });
        }

        let Some(&c) = lx.src.get(lx.pos) else {
            if let Some(&(open, line, col)) = brackets.last() {
                return Err(SyntaxError::new(
                    line,
                    col,
                    format!("'{}' was never closed", open as char),
                ));
            }
            if let Some(l) = cur.take() {
                lines.push(l);
            }
            break;
        };
        let depth = brackets.len() as u32;
        let start = lx.pos;
        let (line, col) = (lx.line, lx.col_of(start));

        let kind = match c {
            b' ' | b'\t' | b'\x0c' => {
                lx.pos += 1;
                continue;
            }
            b'#' => {
                while lx.pos < len && lx.newline_len(lx.pos).is_none() {
                    lx.pos += 1;
                }
                continue;
            }
            b'\\' => {
                lx.pos += 1;
                if !lx.eat_newline() {
                    return Err(SyntaxError::new(
                        line,
                        col,
                        "unexpected character after line continuation character",
                    ));
                }
                continue;
            }
            b'\n' | b'\r' => {
                lx.eat_newline();
                if brackets.is_empty() {
                    if let Some(mut l) = cur.take() {
                        l.end_offset = lx.pos;
                        lines.push(l);
                    }
                }
                continue;
            }
            b'"' | b'\'' => {
                lx.string(start)?;
                TokenKind::Str
            }
            c if c.is_ascii_digit()
                || (c == b'.' && lx.src.get(lx.pos + 1).is_some_and(u8::is_ascii_digit)) =>
            {
                let hex =
                    lx.src[lx.pos..].starts_with(b"0x") || lx.src[lx.pos..].starts_with(b"0X");
                while let Some(&d) = lx.src.get(lx.pos) {
                    let exponent_sign = (d == b'+' || d == b'-')
                        && !hex
                        && matches!(lx.src[lx.pos - 1], b'e' | b'E');
                    if is_ident_char(d) || d == b'.' || exponent_sign {
                        lx.pos += 1;
                    } else {
                        break;
                    }
                }
                TokenKind::Number
            }
            c if is_ident_start(c) => {
                while lx.src.get(lx.pos).is_some_and(|&d| is_ident_char(d)) {
                    lx.pos += 1;
                }
                let quoted = matches!(lx.src.get(lx.pos), Some(b'"') | Some(b'\''));
                if quoted && is_string_prefix(&text[start..lx.pos]) {
                    lx.string(start)?;
                    TokenKind::Str
                } else {
                    TokenKind::Name
                }
            }
            b'(' | b'[' | b'{' => {
                brackets.push((c, line, col));
                lx.pos += 1;
                TokenKind::Op
            }
            b')' | b']' | b'}' => {
                let expected = match c {
                    b')' => b'(',
                    b']' => b'[',
                    _ => b'{',
                };
                match brackets.pop() {
                    Some((open, ..)) if open == expected => {}
                    Some((open, ..)) => {
                        return Err(SyntaxError::new(
                            line,
                            col,
                            format!(
                                "closing parenthesis '{}' does not match opening parenthesis '{}'",
                                c as char, open as char
                            ),
                        ))
                    }
                    None => {
                        return Err(SyntaxError::new(
                            line,
                            col,
                            format!("unmatched '{}'", c as char),
                        ))
                    }
                }
                lx.pos += 1;
                let tok_depth = brackets.len() as u32;
                push_token(&mut cur, &lx, TokenKind::Op, start, line, col, tok_depth);
                continue;
            }
            b'$' | b'?' | b'`' => {
                return Err(SyntaxError::new(
                    line,
                    col,
                    format!("invalid character '{}'", c as char),
                ))
            }
            b':' if lx.src.get(lx.pos + 1) == Some(&b'=') => {
                lx.pos += 2;
                TokenKind::Op
            }
            b'-' if lx.src.get(lx.pos + 1) == Some(&b'>') => {
                lx.pos += 2;
                TokenKind::Op
            }
            c if c.is_ascii() => {
                lx.pos += 1;
                TokenKind::Op
            }
            _ => {
                return Err(SyntaxError::new(line, col, "invalid non-ASCII character"));
            }
        };
        push_token(&mut cur, &lx, kind, start, line, col, depth);
    }
    Ok(lines)
}

fn push_token(
    cur: &mut Option<LogicalLine>,
    lx: &Lexer<'_>,
    kind: TokenKind,
    start: usize,
    line: usize,
    col: usize,
    depth: u32,
) {
    if let Some(l) = cur.as_mut() {
        l.tokens.push(Token {
            kind,
            start,
            end: lx.pos,
            line,
            col,
            end_line: lx.line,
            end_col: lx.col_of(lx.pos),
            depth,
        });
    }
}

/// Where a clause's suite starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Suite {
    /// Statements on their own lines; `line_start` is the first one's physical
    /// line start and `indent` its leading whitespace.
    Block { line_start: usize, indent: String },
    /// Simple statements on the header line, starting at `start`.
    Inline { start: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct Clause {
    pub line: usize,
    pub col: usize,
    /// Offset just past the header's `:`.
    pub colon_end: usize,
    pub suite: Suite,
    pub end_line: usize,
    pub end_col: usize,
    pub end_offset: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Handler {
    pub clause: Clause,
    /// Declared types, each as written with whitespace removed. A bare
    /// `except:` declares `BaseException`.
    pub types: Vec<String>,
    /// Source range of the type expression; `None` for a bare `except:`.
    pub type_range: Option<Range<usize>>,
}

#[derive(Debug, Clone)]
pub(crate) struct TryStatement {
    pub line: usize,
    pub col: usize,
    pub indent: String,
    pub body: Clause,
    pub handlers: Vec<Handler>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub else_clause: Option<Clause>,
    pub finally_clause: Option<Clause>,
    pub end_offset: usize,
    pub function: String,
}

pub(crate) const BARE_EXCEPT_TYPE: &str = "BaseException";

struct Scanner<'a> {
    src: &'a str,
    lines: Vec<LogicalLine>,
}

impl Scanner<'_> {
    fn text(&self, t: &Token) -> &str {
        &self.src[t.start..t.end]
    }

    fn err_at(&self, i: usize, message: impl Into<String>) -> SyntaxError {
        let t = &self.lines[i].tokens[0];
        SyntaxError::new(t.line, t.col, message)
    }

    fn check_indentation(&self) -> Result<(), SyntaxError> {
        let mut stack = vec![0usize];
        for (i, line) in self.lines.iter().enumerate() {
            let top = *stack.last().unwrap_or(&0);
            let opens = i > 0 && self.lines[i - 1].opens_block(self.src);
            if opens {
                if line.indent <= top {
                    return Err(self.err_at(i, "expected an indented block"));
                }
                stack.push(line.indent);
            } else if line.indent > top {
                return Err(self.err_at(i, "unexpected indent"));
            } else {
                while line.indent < *stack.last().unwrap_or(&0) {
                    stack.pop();
                }
                if stack.last() != Some(&line.indent) {
                    return Err(
                        self.err_at(i, "unindent does not match any outer indentation level")
                    );
                }
            }
        }
        if let Some(last) = self.lines.last() {
            if last.opens_block(self.src) {
                let t = last.tokens.last().expect("opening line has tokens");
                return Err(SyntaxError::new(
                    t.end_line,
                    t.end_col,
                    "expected an indented block",
                ));
            }
        }
        Ok(())
    }

    /// Index one past the last logical line of the clause headed at `i`.
    fn clause_end(&self, i: usize) -> usize {
        let header = &self.lines[i];
        if !header.opens_block(self.src) {
            return i + 1;
        }
        let mut j = i + 1;
        while j < self.lines.len() && self.lines[j].indent > header.indent {
            j += 1;
        }
        j
    }

    fn header_colon(&self, i: usize) -> Option<usize> {
        self.lines[i]
            .tokens
            .iter()
            .position(|t| t.kind == TokenKind::Op && t.depth == 0 && self.text(t) == ":")
    }

    fn clause(&self, i: usize, colon: usize) -> (Clause, usize) {
        let line = &self.lines[i];
        let end = self.clause_end(i);
        let last = &self.lines[end - 1];
        let last_tok = last.tokens.last().expect("logical lines are never empty");
        let suite = if colon + 1 < line.tokens.len() {
            Suite::Inline {
                start: line.tokens[colon + 1].start,
            }
        } else {
            let first = &self.lines[i + 1];
            Suite::Block {
                line_start: first.line_start,
                indent: self.src[first.line_start..first.indent_end].to_string(),
            }
        };
        let clause = Clause {
            line: line.tokens[0].line,
            col: line.tokens[0].col,
            colon_end: line.tokens[colon].end,
            suite,
            end_line: last_tok.end_line,
            end_col: last_tok.end_col,
            end_offset: last.end_offset,
        };
        (clause, end)
    }

    fn simple_clause(&self, i: usize, keyword: &str) -> Result<(Clause, usize), SyntaxError> {
        let toks = &self.lines[i].tokens;
        if toks.len() < 2 || self.text(&toks[1]) != ":" {
            return Err(self.err_at(i, format!("expected ':' after '{keyword}'")));
        }
        Ok(self.clause(i, 1))
    }

    fn handler(&self, i: usize) -> Result<(Handler, usize), SyntaxError> {
        let toks = &self.lines[i].tokens;
        let colon = self
            .header_colon(i)
            .ok_or_else(|| self.err_at(i, "expected ':' after 'except'"))?;
        if toks.get(1).is_some_and(|t| self.text(t) == "*") {
            return Err(self.err_at(i, "'except*' clauses are not supported"));
        }
        let type_end = toks[1..colon]
            .iter()
            .position(|t| t.depth == 0 && t.kind == TokenKind::Name && self.text(t) == "as")
            .map_or(colon, |p| p + 1);
        let type_toks = &toks[1..type_end];
        let (types, type_range) = if type_toks.is_empty() {
            (vec![BARE_EXCEPT_TYPE.to_string()], None)
        } else {
            if type_toks
                .iter()
                .any(|t| t.depth == 0 && self.text(t) == ",")
            {
                return Err(self.err_at(i, "multiple exception types must be parenthesized"));
            }
            let first = &type_toks[0];
            let last = &type_toks[type_toks.len() - 1];
            let parenthesized = self.text(first) == "("
                && self.text(last) == ")"
                && type_toks[1..type_toks.len() - 1]
                    .iter()
                    .all(|t| t.depth > 0);
            let types = if parenthesized {
                let inner = &type_toks[1..type_toks.len() - 1];
                inner
                    .split(|t| t.depth == 1 && self.text(t) == ",")
                    .filter(|part| !part.is_empty())
                    .map(|part| self.squash(part))
                    .collect()
            } else {
                vec![self.squash(type_toks)]
            };
            if types.is_empty() {
                return Err(self.err_at(i, "empty exception type tuple"));
            }
            (types, Some(first.start..last.end))
        };
        let (clause, end) = self.clause(i, colon);
        Ok((
            Handler {
                clause,
                types,
                type_range,
            },
            end,
        ))
    }

    fn squash(&self, toks: &[Token]) -> String {
        let (a, b) = (toks[0].start, toks[toks.len() - 1].end);
        self.src[a..b].split_whitespace().collect()
    }

    fn try_statement(
        &self,
        i: usize,
        function: &str,
    ) -> Result<(TryStatement, usize), SyntaxError> {
        let header = &self.lines[i];
        let (body, mut j) = self.simple_clause(i, "try")?;
        let same_level = |j: usize, word: &str| {
            j < self.lines.len()
                && self.lines[j].indent == header.indent
                && self.lines[j].first_is(self.src, word)
        };
        let mut handlers = Vec::new();
        while same_level(j, "except") {
            let (h, next) = self.handler(j)?;
            handlers.push(h);
            j = next;
        }
        for (k, h) in handlers.iter().enumerate() {
            if h.type_range.is_none() && k + 1 != handlers.len() {
                let t = &h.clause;
                return Err(SyntaxError::new(
                    t.line,
                    t.col,
                    "default 'except:' must be last",
                ));
            }
        }
        let mut else_clause = None;
        if !handlers.is_empty() && same_level(j, "else") {
            let (c, next) = self.simple_clause(j, "else")?;
            else_clause = Some(c);
            j = next;
        }
        let mut finally_clause = None;
        if same_level(j, "finally") {
            let (c, next) = self.simple_clause(j, "finally")?;
            finally_clause = Some(c);
            j = next;
        }
        if handlers.is_empty() && finally_clause.is_none() {
            return Err(self.err_at(i, "expected 'except' or 'finally' block"));
        }
        let end_offset = self.lines[j - 1].end_offset;
        let t = &header.tokens[0];
        Ok((
            TryStatement {
                line: t.line,
                col: t.col,
                indent: self.src[header.line_start..header.indent_end].to_string(),
                body,
                handlers,
                else_clause,
                finally_clause,
                end_offset,
                function: function.to_string(),
            },
            j,
        ))
    }
}

/// Parses a module and returns its `try` statements in source order (outer
/// statements precede the statements nested inside them).
pub(crate) fn try_statements(src: &str) -> Result<Vec<TryStatement>, SyntaxError> {
    let scanner = Scanner {
        src,
        lines: logical_lines(src)?,
    };
    scanner.check_indentation()?;

    let mut scopes: Vec<(usize, String)> = Vec::new();
    let mut claimed = vec![false; scanner.lines.len()];
    let mut out = Vec::new();
    for i in 0..scanner.lines.len() {
        let line = &scanner.lines[i];
        while scopes
            .last()
            .is_some_and(|(indent, _)| *indent >= line.indent)
        {
            scopes.pop();
        }
        let function = if scopes.is_empty() {
            "<module>".to_string()
        } else {
            scopes
                .iter()
                .map(|(_, n)| n.as_str())
                .collect::<Vec<_>>()
                .join(".")
        };

        if line.first_is(src, "try") {
            let (stmt, end) = scanner.try_statement(i, &function)?;
            let clauses = scanner.lines[i..end]
                .iter()
                .enumerate()
                .filter(|(_, l)| l.indent == line.indent)
                .map(|(k, _)| i + k);
            for k in clauses {
                claimed[k] = true;
            }
            out.push(stmt);
        } else if (line.first_is(src, "except") || line.first_is(src, "finally")) && !claimed[i] {
            return Err(scanner.err_at(i, "invalid syntax: clause without 'try'"));
        }

        let toks = &line.tokens;
        let def_at = if line.first_is(src, "async") { 1 } else { 0 };
        let is_scope = toks.get(def_at).is_some_and(|t| {
            t.kind == TokenKind::Name && matches!(scanner.text(t), "def" | "class")
        });
        if is_scope && line.opens_block(src) {
            if let Some(name) = toks.get(def_at + 1) {
                scopes.push((line.indent, scanner.text(name).to_string()));
            }
        }
    }
    Ok(out)
}
