use std::fmt;

/// A constituency tree node.
///
/// Preterminals carry a `terminal` word and no children. Terminal-stripped
/// trees (the form produced by [`delinearize`](super::delinearize)) have
/// preterminals with neither.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ParseTree {
    pub label: String,
    pub children: Vec<ParseTree>,
    pub terminal: Option<String>,
}

impl ParseTree {
    pub fn node(label: impl Into<String>, children: Vec<ParseTree>) -> Self {
        Self {
            label: label.into(),
            children,
            terminal: None,
        }
    }

    pub fn preterminal(label: impl Into<String>, word: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            children: Vec::new(),
            terminal: Some(word.into()),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Terminal words in left-to-right order.
    pub fn words(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit_leaves(&mut |n| {
            if let Some(w) = &n.terminal {
                out.push(w.as_str());
            }
        });
        out
    }

    /// Labels of the leaf nodes (preterminals) in order.
    pub fn leaf_labels(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit_leaves(&mut |n| out.push(n.label.as_str()));
        out
    }

    fn visit_leaves<'a>(&'a self, f: &mut impl FnMut(&'a ParseTree)) {
        if self.is_leaf() {
            f(self);
        } else {
            self.children.iter().for_each(|c| c.visit_leaves(f));
        }
    }

    pub fn strip_terminals(&self) -> ParseTree {
        ParseTree {
            label: self.label.clone(),
            children: self.children.iter().map(ParseTree::strip_terminals).collect(),
            terminal: None,
        }
    }

    /// Number of levels; a lone node has depth 1.
    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(ParseTree::depth).max().unwrap_or(0)
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(ParseTree::node_count).sum::<usize>()
    }

    /// All nodes in pre-order.
    pub fn nodes(&self) -> Vec<&ParseTree> {
        fn walk<'a>(n: &'a ParseTree, out: &mut Vec<&'a ParseTree>) {
            out.push(n);
            n.children.iter().for_each(|c| walk(c, out));
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// Replaces terminal words left to right; `words` must match the leaf count.
    pub fn with_words<S: AsRef<str>>(&self, words: &[S]) -> Option<ParseTree> {
        let mut it = words.iter();
        let t = self.relabel_words(&mut it)?;
        it.next().is_none().then_some(t)
    }

    fn relabel_words<'a, S: AsRef<str> + 'a>(
        &self,
        it: &mut impl Iterator<Item = &'a S>,
    ) -> Option<ParseTree> {
        if self.is_leaf() {
            return Some(ParseTree::preterminal(
                self.label.clone(),
                it.next()?.as_ref(),
            ));
        }
        let children = self
            .children
            .iter()
            .map(|c| c.relabel_words(it))
            .collect::<Option<Vec<_>>>()?;
        Some(ParseTree::node(self.label.clone(), children))
    }
}

/// Canonical bracketed form: `(S (NP (PRP he)) (VP ...))`.
impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.label)?;
        if let Some(w) = &self.terminal {
            write!(f, " {w}")?;
        }
        for c in &self.children {
            write!(f, " {c}")?;
        }
        write!(f, ")")
    }
}
