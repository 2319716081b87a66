use std::fmt;
use std::str::FromStr;

use super::{ParseTree, StructureError};

pub const CLOSE: &str = ")";

/// A parse rendered as bracket tokens: `"(X"` opens a node labelled `X`,
/// `")"` closes the innermost open node.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LinearizedParse {
    tokens: Vec<String>,
}

impl LinearizedParse {
    /// Validates balance: the open count stays positive until the last token
    /// and returns to zero there.
    pub fn new(tokens: Vec<String>) -> Result<Self, StructureError> {
        check_balanced(&tokens)?;
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }
}

fn check_balanced(tokens: &[String]) -> Result<(), StructureError> {
    if tokens.is_empty() {
        return Err(StructureError::Empty);
    }
    let mut open: usize = 0;
    for (i, t) in tokens.iter().enumerate() {
        if t == CLOSE {
            if open == 0 {
                return Err(StructureError::Unbalanced { position: i });
            }
            open -= 1;
            if open == 0 && i + 1 != tokens.len() {
                return Err(StructureError::Unbalanced { position: i + 1 });
            }
        } else {
            match t.strip_prefix('(') {
                Some(label) if valid_label(label) => open += 1,
                _ => return Err(StructureError::BadToken(t.clone())),
            }
        }
    }
    if open != 0 {
        return Err(StructureError::Unbalanced {
            position: tokens.len(),
        });
    }
    Ok(())
}

pub(crate) fn valid_label(label: &str) -> bool {
    !label.is_empty() && !label.chars().any(|c| c == '(' || c == ')' || c.is_whitespace())
}

/// Compact string form, e.g. `(S(NP(PRP))(VP(VBZ)(NP(NNS)))(.))`.
impl fmt::Display for LinearizedParse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.tokens.iter().try_for_each(|t| f.write_str(t))
    }
}

/// Accepts the compact form; whitespace between tokens is ignored.
impl FromStr for LinearizedParse {
    type Err = StructureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut tokens = Vec::new();
        let mut chars = s.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            match c {
                c if c.is_whitespace() => {}
                ')' => tokens.push(CLOSE.to_string()),
                '(' => {
                    let mut end = i + 1;
                    while let Some(&(j, d)) = chars.peek() {
                        if d == '(' || d == ')' || d.is_whitespace() {
                            break;
                        }
                        end = j + d.len_utf8();
                        chars.next();
                    }
                    tokens.push(s[i..end].to_string());
                }
                _ => return Err(StructureError::BadToken(c.to_string())),
            }
        }
        Self::new(tokens)
    }
}

/// Depth-first token emission; terminal words are dropped.
pub fn linearize(tree: &ParseTree) -> LinearizedParse {
    fn walk(t: &ParseTree, out: &mut Vec<String>) {
        out.push(format!("({}", t.label));
        t.children.iter().for_each(|c| walk(c, out));
        out.push(CLOSE.to_string());
    }
    let mut tokens = Vec::with_capacity(2 * tree.node_count());
    walk(tree, &mut tokens);
    LinearizedParse { tokens }
}

/// Inverse of [`linearize`]; returns a terminal-stripped tree.
pub fn delinearize(lin: &LinearizedParse) -> Result<ParseTree, StructureError> {
    delinearize_tokens(lin.tokens())
}

/// Like [`delinearize`] but over raw (possibly malformed) tokens, as produced
/// by a decoder.
pub fn delinearize_tokens<S: AsRef<str>>(tokens: &[S]) -> Result<ParseTree, StructureError> {
    if tokens.is_empty() {
        return Err(StructureError::Empty);
    }
    let mut stack: Vec<ParseTree> = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        let t = t.as_ref();
        if t == CLOSE {
            let done = stack.pop().ok_or(StructureError::Unbalanced { position: i })?;
            match stack.last_mut() {
                Some(parent) => parent.children.push(done),
                None if i + 1 == tokens.len() => return Ok(done),
                None => return Err(StructureError::Unbalanced { position: i + 1 }),
            }
        } else {
            match t.strip_prefix('(') {
                Some(label) if valid_label(label) => stack.push(ParseTree::node(label, Vec::new())),
                _ => return Err(StructureError::BadToken(t.to_string())),
            }
        }
    }
    Err(StructureError::Unbalanced {
        position: tokens.len(),
    })
}

/// The top two levels of a parse: root label plus its children's labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Template(ParseTree);

impl Template {
    pub fn tree(&self) -> &ParseTree {
        &self.0
    }

    pub fn linearized(&self) -> LinearizedParse {
        linearize(&self.0)
    }

    /// Builds a template from any tree of depth ≤ 2 (deeper trees are cut).
    pub fn from_tree(tree: &ParseTree) -> Self {
        extract_template(tree)
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.linearized())
    }
}

impl FromStr for Template {
    type Err = StructureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let tree = delinearize(&s.parse()?)?;
        Ok(extract_template(&tree))
    }
}

pub fn extract_template(tree: &ParseTree) -> Template {
    Template(ParseTree::node(
        tree.label.clone(),
        tree.children
            .iter()
            .map(|c| ParseTree::node(c.label.clone(), Vec::new()))
            .collect(),
    ))
}

/// Ordered part-of-speech labels of a sentence.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TagSequence(pub Vec<String>);

impl TagSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tags(&self) -> &[String] {
        &self.0
    }
}

pub fn tag_sequence(tree: &ParseTree) -> TagSequence {
    TagSequence(tree.leaf_labels().into_iter().map(str::to_string).collect())
}

#[cfg(test)]
mod tests {
    use super::super::parse_ptb_line;
    use super::*;

    fn he_eats() -> ParseTree {
        parse_ptb_line("(S (NP (PRP He)) (VP (VBZ eats) (NP (NNS apples))) (. .))").unwrap()
    }

    #[test]
    fn linearizes_example() {
        assert_eq!(
            linearize(&he_eats()).to_string(),
            "(S(NP(PRP))(VP(VBZ)(NP(NNS)))(.))"
        );
        assert_eq!(linearize(&ParseTree::node("X", vec![])).to_string(), "(X)");
    }

    #[test]
    fn template_of_example() {
        let t = extract_template(&he_eats());
        assert_eq!(t.to_string(), "(S(NP)(VP)(.))");
        assert_eq!(extract_template(&ParseTree::node("X", vec![])).to_string(), "(X)");
        assert_eq!(extract_template(t.tree()), t);
    }

    #[test]
    fn tags_of_example() {
        let tags = tag_sequence(&he_eats());
        assert_eq!(tags.tags(), ["PRP", "VBZ", "NNS", "."]);
        assert_eq!(tag_sequence(&parse_ptb_line("(X x)").unwrap()).tags(), ["X"]);
    }

    #[test]
    fn delinearize_cases() {
        let t = delinearize(&"(S(NP)(VP)(.))".parse().unwrap()).unwrap();
        assert_eq!(t.label, "S");
        assert_eq!(t.depth(), 2);
        assert!(matches!(
            "(S(NP".parse::<LinearizedParse>(),
            Err(StructureError::Unbalanced { .. })
        ));
        assert!(delinearize_tokens(&["(S", "(NP"]).is_err());
        assert!(delinearize_tokens(&["(S", ")", "(NP", ")"]).is_err());
        assert!(delinearize_tokens::<&str>(&[]).is_err());
        assert!(delinearize_tokens(&["S", ")"]).is_err());
    }

    #[test]
    fn unbalanced_printed_template_is_rejected() {
        // the string "(S(NP)(VP))(.))" closes the root before "(."
        assert!("(S(NP)(VP))(.))".parse::<LinearizedParse>().is_err());
    }

    #[test]
    fn from_str_round_trips_display() {
        let s = "(S(NP-SBJ(PRP))(VP(VBD)(NP-OBJ(DT)(NN)))(.))";
        assert_eq!(s.parse::<LinearizedParse>().unwrap().to_string(), s);
    }
}
