//! SL-subset s-expression syntax: the single content language carried by
//! every message on the platform.
//!
//! The grammar is deliberately small. An expression is an atom, a keyword,
//! a quoted string, or a parenthesized list of expressions:
//!
//! * atoms are maximal runs of characters that are not whitespace, `(`,
//!   `)`, or `"`;
//! * a leading `:` turns the token into a keyword (stored without the
//!   colon);
//! * double-quoted strings accept `\"` and `\\` escapes, any other
//!   character (including a lone backslash) stands for itself.
//!
//! [`print`] produces the canonical form: single spaces between siblings,
//! no newlines, keywords with their leading `:`, strings always quoted.
//! Canonical printing makes byte comparison a valid oracle, and the
//! printed form is exactly what goes on the wire.

use std::fmt;

use thiserror::Error;

/// One node of a parsed SL expression.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SlNode {
    /// Bare symbol. Nonempty, never contains whitespace, parens, or `"`.
    Atom(String),
    /// Quoted text. May contain any character.
    Str(String),
    /// `:name` token, stored without the leading colon.
    Keyword(String),
    /// Ordered children.
    List(Vec<SlNode>),
}

impl SlNode {
    pub fn atom(text: impl Into<String>) -> Self {
        SlNode::Atom(text.into())
    }

    pub fn string(text: impl Into<String>) -> Self {
        SlNode::Str(text.into())
    }

    pub fn keyword(name: impl Into<String>) -> Self {
        SlNode::Keyword(name.into())
    }

    pub fn list(children: impl Into<Vec<SlNode>>) -> Self {
        SlNode::List(children.into())
    }

    /// Atom text, if this node is an atom.
    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SlNode::Atom(s) => Some(s),
            _ => None,
        }
    }

    /// String content, if this node is a quoted string.
    pub fn as_str(&self) -> Option<&str> {
        match self {
            SlNode::Str(s) => Some(s),
            _ => None,
        }
    }

    /// Child list, if this node is a list.
    pub fn as_list(&self) -> Option<&[SlNode]> {
        match self {
            SlNode::List(items) => Some(items),
            _ => None,
        }
    }

    /// Head atom of a list node, the usual dispatch key.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|items| items.first()).and_then(SlNode::as_atom)
    }

    /// Looks up the value following keyword `:name` in this list's children.
    pub fn keyword_value(&self, name: &str) -> Option<&SlNode> {
        let items = self.as_list()?;
        let mut iter = items.iter();
        while let Some(item) = iter.next() {
            if matches!(item, SlNode::Keyword(k) if k == name) {
                return iter.next();
            }
        }
        None
    }
}

impl fmt::Display for SlNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlNode::Atom(s) => f.write_str(s),
            SlNode::Keyword(s) => write!(f, ":{s}"),
            SlNode::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        _ => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            SlNode::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Parse failure, with the 0-based byte offset where the problem was found.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty input")]
    EmptyInput,
    #[error("unbalanced parentheses at offset {0}")]
    UnbalancedParens(usize),
    #[error("unterminated string starting at offset {0}")]
    UnterminatedString(usize),
    #[error("trailing content at offset {0}")]
    TrailingGarbage(usize),
}

/// Parses exactly one s-expression; trailing whitespace is permitted, any
/// other trailing content is an error.
pub fn parse(text: &str) -> Result<SlNode, ParseError> {
    let mut p = Parser { bytes: text.as_bytes(), pos: 0 };
    p.skip_ws();
    if p.at_end() {
        return Err(ParseError::EmptyInput);
    }
    let node = p.parse_expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(ParseError::TrailingGarbage(p.pos));
    }
    Ok(node)
}

/// Canonical single-line form of `node`. `parse(&print(n)) == n` for every
/// well-formed node.
pub fn print(node: &SlNode) -> String {
    node.to_string()
}

/// True when `text` is usable as a bare symbol in a message: nonempty, no
/// whitespace/parens/quotes, and no leading colon. The validity check for
/// names (agents, ontologies, variables) that travel inside messages.
pub fn is_atom_text(text: &str) -> bool {
    !text.is_empty()
        && !text.starts_with(':')
        && !text.bytes().any(|b| b.is_ascii_whitespace() || b == b'(' || b == b')' || b == b'"')
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn parse_expr(&mut self) -> Result<SlNode, ParseError> {
        match self.peek() {
            None => Err(ParseError::UnbalancedParens(self.pos)),
            Some(b'(') => self.parse_list(),
            Some(b')') => Err(ParseError::UnbalancedParens(self.pos)),
            Some(b'"') => self.parse_string(),
            Some(_) => Ok(self.parse_token()),
        }
    }

    fn parse_list(&mut self) -> Result<SlNode, ParseError> {
        self.pos += 1; // consume '('
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None => return Err(ParseError::UnbalancedParens(self.pos)),
                Some(b')') => {
                    self.pos += 1;
                    return Ok(SlNode::List(items));
                }
                Some(_) => items.push(self.parse_expr()?),
            }
        }
    }

    fn parse_string(&mut self) -> Result<SlNode, ParseError> {
        let start = self.pos;
        self.pos += 1; // consume opening quote
        let mut out = String::new();
        loop {
            match self.peek() {
                None => return Err(ParseError::UnterminatedString(start)),
                Some(b'"') => {
                    self.pos += 1;
                    return Ok(SlNode::Str(out));
                }
                Some(b'\\') => match self.bytes.get(self.pos + 1) {
                    Some(b'"') => {
                        out.push('"');
                        self.pos += 2;
                    }
                    Some(b'\\') => {
                        out.push('\\');
                        self.pos += 2;
                    }
                    // not an escape we know: the backslash stands for itself
                    _ => {
                        out.push('\\');
                        self.pos += 1;
                    }
                },
                Some(_) => {
                    let c = self.next_char();
                    out.push(c);
                }
            }
        }
    }

    fn parse_token(&mut self) -> SlNode {
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() || b == b'(' || b == b')' || b == b'"' {
                break;
            }
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("token boundaries fall on ASCII delimiters");
        match text.strip_prefix(':') {
            // a lone ':' stays an atom; keyword names are nonempty
            Some(name) if !name.is_empty() => SlNode::Keyword(name.to_string()),
            _ => SlNode::Atom(text.to_string()),
        }
    }

    fn next_char(&mut self) -> char {
        let rest = std::str::from_utf8(&self.bytes[self.pos..])
            .expect("input validated as UTF-8 at entry");
        let c = rest.chars().next().expect("peek saw a byte");
        self.pos += c.len_utf8();
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(s: &str) -> SlNode {
        SlNode::atom(s)
    }

    #[test]
    fn parses_term_mapping_message() {
        let text = r#"(Mapping (From :term "pressure") (To :term "basinc"))"#;
        let node = parse(text).unwrap();
        let expected = SlNode::list(vec![
            atom("Mapping"),
            SlNode::list(vec![atom("From"), SlNode::keyword("term"), SlNode::string("pressure")]),
            SlNode::list(vec![atom("To"), SlNode::keyword("term"), SlNode::string("basinc")]),
        ]);
        assert_eq!(node, expected);
        assert_eq!(print(&node), text);
    }

    #[test]
    fn parses_single_atom() {
        assert_eq!(parse("x").unwrap(), atom("x"));
    }

    #[test]
    fn unbalanced_parens_reports_eof_offset() {
        let err = parse("(a (b c").unwrap_err();
        assert_eq!(err, ParseError::UnbalancedParens(7));
    }

    #[test]
    fn stray_close_paren_is_unbalanced() {
        assert_eq!(parse(")").unwrap_err(), ParseError::UnbalancedParens(0));
    }

    #[test]
    fn empty_and_blank_inputs() {
        assert_eq!(parse("").unwrap_err(), ParseError::EmptyInput);
        assert_eq!(parse("  \n\t").unwrap_err(), ParseError::EmptyInput);
    }

    #[test]
    fn trailing_garbage_reports_offset() {
        assert_eq!(parse("(a b) c").unwrap_err(), ParseError::TrailingGarbage(6));
        assert!(parse("(a b)  \n").is_ok());
    }

    #[test]
    fn unterminated_string_reports_opening_quote() {
        assert_eq!(parse("(a \"bc").unwrap_err(), ParseError::UnterminatedString(3));
    }

    #[test]
    fn string_escapes_round_trip() {
        let node = SlNode::list(vec![atom("a"), SlNode::string(r#"say "hi" \ bye"#)]);
        let printed = print(&node);
        assert_eq!(printed, r#"(a "say \"hi\" \\ bye")"#);
        assert_eq!(parse(&printed).unwrap(), node);
    }

    #[test]
    fn string_with_spaces_stays_quoted() {
        let node = SlNode::list(vec![atom("a"), SlNode::string("b c")]);
        assert_eq!(print(&node), "(a \"b c\")");
    }

    #[test]
    fn keywords_parse_and_print_with_colon() {
        let node = parse("(agent :name agent1 :type locationAgent)").unwrap();
        assert_eq!(
            node,
            SlNode::list(vec![
                atom("agent"),
                SlNode::keyword("name"),
                atom("agent1"),
                SlNode::keyword("type"),
                atom("locationAgent"),
            ])
        );
        assert_eq!(node.keyword_value("name"), Some(&atom("agent1")));
        assert_eq!(node.keyword_value("type"), Some(&atom("locationAgent")));
        assert_eq!(node.keyword_value("missing"), None);
    }

    #[test]
    fn lone_colon_is_an_atom() {
        assert_eq!(parse(":").unwrap(), atom(":"));
    }

    #[test]
    fn whitespace_canonicalization() {
        let node = parse("( a\n  ( b   c )\t)").unwrap();
        assert_eq!(print(&node), "(a (b c))");
    }

    #[test]
    fn non_ascii_symbols_round_trip() {
        // subscript digits are ordinary symbol characters
        let node = parse("(NO₂NO₃ normal)").unwrap();
        assert_eq!(print(&node), "(NO₂NO₃ normal)");
    }
}
