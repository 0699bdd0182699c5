//! AHU canonical codes for rooted trees.
//!
//! Two rooted trees receive the same code iff there is a root-preserving
//! bijection between them that preserves adjacency.

/// Canonical parenthesis code of the subtree rooted at `root`.
///
/// `children[v]` lists the children of `v`. Runs an explicit post-order so
/// deep trees do not overflow the call stack.
pub fn canonical_code(children: &[Vec<usize>], root: usize) -> String {
    let mut codes: Vec<Option<String>> = vec![None; children.len()];
    let mut stack = vec![(root, false)];
    while let Some((v, expanded)) = stack.pop() {
        if expanded {
            let mut child_codes: Vec<String> = children[v]
                .iter()
                .map(|&c| codes[c].take().expect("child visited before parent"))
                .collect();
            child_codes.sort_unstable();
            let mut code = String::with_capacity(2 + child_codes.iter().map(String::len).sum::<usize>());
            code.push('(');
            for c in &child_codes {
                code.push_str(c);
            }
            code.push(')');
            codes[v] = Some(code);
        } else {
            stack.push((v, true));
            stack.extend(children[v].iter().map(|&c| (c, false)));
        }
    }
    codes[root].take().unwrap_or_default()
}

/// Canonical code from a parent array (`None` marks the root).
pub fn canonical_code_from_parents(parents: &[Option<usize>]) -> String {
    let mut children = vec![Vec::new(); parents.len()];
    let mut root = 0;
    for (v, p) in parents.iter().enumerate() {
        match p {
            Some(p) => children[*p].push(v),
            None => root = v,
        }
    }
    canonical_code(&children, root)
}

/// Number of vertices encoded by a canonical code.
pub fn code_size(code: &str) -> usize {
    code.bytes().filter(|&b| b == b'(').count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_and_star_differ() {
        // root - a - b versus root with two leaves
        let path = vec![vec![1], vec![2], vec![]];
        let cherry = vec![vec![1, 2], vec![], vec![]];
        assert_eq!(canonical_code(&path, 0), "((()))");
        assert_eq!(canonical_code(&cherry, 0), "(()())");
    }

    #[test]
    fn child_order_is_irrelevant() {
        let a = vec![vec![1, 2], vec![3], vec![], vec![]];
        let b = vec![vec![2, 1], vec![], vec![3], vec![]];
        assert_eq!(canonical_code(&a, 0), canonical_code(&b, 0));
        assert_eq!(code_size(&canonical_code(&a, 0)), 4);
    }

    #[test]
    fn root_matters() {
        // Same unrooted path on three vertices, rooted at an end vs the middle.
        let end = canonical_code_from_parents(&[None, Some(0), Some(1)]);
        let mid = canonical_code_from_parents(&[Some(1), None, Some(1)]);
        assert_ne!(end, mid);
    }
}
