//! S-expression reader with source positions.

use std::fmt;

/// 1-based line/column of a token.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Sexpr {
    /// Symbol, already lowercased.
    Sym(String, Pos),
    List(Vec<Sexpr>, Pos),
}

impl Sexpr {
    pub fn pos(&self) -> Pos {
        match self {
            Sexpr::Sym(_, p) | Sexpr::List(_, p) => *p,
        }
    }

    pub fn as_sym(&self) -> Option<&str> {
        match self {
            Sexpr::Sym(s, _) => Some(s),
            Sexpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexpr]> {
        match self {
            Sexpr::List(items, _) => Some(items),
            Sexpr::Sym(..) => None,
        }
    }

    /// Head symbol of a list, if any.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|l| l.first()).and_then(Sexpr::as_sym)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReadError {
    pub pos: Pos,
    pub message: String,
}

/// Reads every top-level expression in `text`. `;` starts a line comment.
pub fn read_all(text: &str) -> Result<Vec<Sexpr>, ReadError> {
    let mut stack: Vec<(Vec<Sexpr>, Pos)> = Vec::new();
    let mut top = Vec::new();
    let mut line = 1;
    let mut col = 0;
    let mut chars = text.chars().peekable();
    let mut sym = String::new();
    let mut sym_pos = Pos::default();

    fn flush(sym: &mut String, pos: Pos, stack: &mut [(Vec<Sexpr>, Pos)], top: &mut Vec<Sexpr>) {
        if sym.is_empty() {
            return;
        }
        let s = Sexpr::Sym(std::mem::take(sym).to_lowercase(), pos);
        match stack.last_mut() {
            Some((items, _)) => items.push(s),
            None => top.push(s),
        }
    }

    while let Some(ch) = chars.next() {
        if ch == '\n' {
            flush(&mut sym, sym_pos, &mut stack, &mut top);
            line += 1;
            col = 0;
            continue;
        }
        col += 1;
        let here = Pos { line, col };
        match ch {
            ';' => {
                flush(&mut sym, sym_pos, &mut stack, &mut top);
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => {
                flush(&mut sym, sym_pos, &mut stack, &mut top);
                stack.push((Vec::new(), here));
            }
            ')' => {
                flush(&mut sym, sym_pos, &mut stack, &mut top);
                let Some((items, start)) = stack.pop() else {
                    return Err(ReadError { pos: here, message: "unbalanced ')'".into() });
                };
                let list = Sexpr::List(items, start);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => top.push(list),
                }
            }
            c if c.is_whitespace() => flush(&mut sym, sym_pos, &mut stack, &mut top),
            c => {
                if sym.is_empty() {
                    sym_pos = here;
                }
                sym.push(c);
            }
        }
    }
    flush(&mut sym, sym_pos, &mut stack, &mut top);
    if let Some((_, start)) = stack.last() {
        return Err(ReadError { pos: *start, message: "unclosed '('".into() });
    }
    Ok(top)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists_with_positions() {
        let exprs = read_all("(a (B c))\n ; note\n(d)").unwrap();
        assert_eq!(exprs.len(), 2);
        assert_eq!(exprs[0].head(), Some("a"));
        let inner = &exprs[0].as_list().unwrap()[1];
        assert_eq!(inner.head(), Some("b"));
        assert_eq!(inner.pos(), Pos { line: 1, col: 4 });
        assert_eq!(exprs[1].pos(), Pos { line: 3, col: 1 });
    }

    #[test]
    fn reports_unbalanced_parens() {
        let err = read_all("(a\n (b)").unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 1 });
        let err = read_all("a)").unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 2 });
    }
}
