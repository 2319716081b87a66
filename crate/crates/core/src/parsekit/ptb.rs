use super::{ParseTree, PtbError};

/// Reads one Penn-Treebank style S-expression, e.g.
/// `(S (NP (PRP He)) (VP (VBZ eats) (NP (NNS apples))) (. .))`.
///
/// Whitespace between tokens is free-form. A node whose body is a single bare
/// word becomes a preterminal; a node with no body at all is a terminal-
/// stripped leaf, so `(S(NP)(VP))` also reads.
pub fn parse_ptb_line(text: &str) -> Result<ParseTree, PtbError> {
    let mut reader = Reader {
        src: text.as_bytes(),
        pos: 0,
    };
    reader.skip_ws();
    let tree = reader.node()?;
    reader.skip_ws();
    if reader.pos != reader.src.len() {
        return Err(reader.err("trailing input after tree"));
    }
    Ok(tree)
}

struct Reader<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn err(&self, msg: &str) -> PtbError {
        PtbError {
            offset: self.pos,
            message: msg.to_string(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn atom(&mut self) -> &str {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| !c.is_ascii_whitespace() && c != b'(' && c != b')')
        {
            self.pos += 1;
        }
        // boundaries are ASCII bytes, so the slice is valid UTF-8
        std::str::from_utf8(&self.src[start..self.pos]).expect("utf-8 boundary")
    }

    fn node(&mut self) -> Result<ParseTree, PtbError> {
        if self.peek() != Some(b'(') {
            return Err(self.err("expected '('"));
        }
        self.pos += 1;
        self.skip_ws();
        let label = self.atom().to_string();
        if label.is_empty() {
            return Err(self.err("empty label"));
        }
        self.skip_ws();
        let mut children = Vec::new();
        let mut terminal = None;
        loop {
            match self.peek() {
                None => return Err(self.err("unbalanced parentheses: missing ')'")),
                Some(b')') => {
                    self.pos += 1;
                    break;
                }
                Some(b'(') => {
                    if terminal.is_some() {
                        return Err(self.err("node mixes a word and subtrees"));
                    }
                    children.push(self.node()?);
                }
                Some(_) => {
                    if terminal.is_some() || !children.is_empty() {
                        return Err(self.err("unexpected bare word"));
                    }
                    terminal = Some(self.atom().to_string());
                }
            }
            self.skip_ws();
        }
        Ok(ParseTree {
            label,
            children,
            terminal,
        })
    }
}
