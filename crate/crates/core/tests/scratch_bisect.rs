//! Pinpoints which p08 statement breaks normalization.

use legacy_forge_core::translate::normalize_java;

#[test]
fn bisect() {
    let frames = [
        ("list_decl", "class A { void m() { java.util.List<String> names = new java.util.ArrayList<String>(); } }"),
        ("list_decl_short", "class A { void m() { List<String> names = new ArrayList<String>(); } }"),
        ("map_decl", "class A { void m() { Map<String, Integer> ranks = new HashMap<String, Integer>(); } }"),
        ("add_call", "class A { void m(List<String> names) { names.add(\"alpha\"); } }"),
        ("size_plus_get", "class A { void m(List<String> names, Map<String, Integer> ranks) { System.out.println(names.size() + ranks.get(\"alpha\")); } }"),
        ("imports", "import java.util.ArrayList;\nimport java.util.List;\nclass A { void m() { List<String> x = new ArrayList<String>(); } }"),
    ];
    for (label, src) in frames {
        match normalize_java(src) {
            Ok(_) => println!("{label}: OK"),
            Err(e) => println!("{label}: ERR {e}"),
        }
    }
}
