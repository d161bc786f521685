//! Template-based C programs with known, injected defects.
//!
//! Every program is a handful of randomized filler functions plus one
//! "site" function. The vulnerable variant of a site omits the guard that
//! the safe variant carries (a NULL check, a bounds check or an overflow
//! check), so labels are known by construction.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DatasetError, Label, LabeledSource, VulnClass};

const FILLERS: &[(&str, &str)] = &[
    (
        "unsigned {F}(const unsigned char *s, int n)
{
    unsigned h = {K1}u;
    for (int i = 0; i < n; i++)
        h = (h * {K2}u) ^ s[i];
    return h;
}",
        "acc ^= {F}((const unsigned char *)argv[0], (int)strlen(argv[0]));",
    ),
    (
        "int {F}(const int *a, int n)
{
    int m = a[0];
    for (int i = 1; i < n; i++)
        if (a[i] > m)
            m = a[i];
    return m;
}",
        "{ int t[{N}]; for (int i = 0; i < {N}; i++) t[i] = (i * {K1}) % {K2}; acc += {F}(t, {N}); }",
    ),
    (
        "void {F}(char *s)
{
    size_t n = strlen(s);
    for (size_t i = 0; i < n / 2; i++) {
        char c = s[i];
        s[i] = s[n - 1 - i];
        s[n - 1 - i] = c;
    }
}",
        "{ char b[{N}]; snprintf(b, sizeof b, \"%d-{K1}\", argc); {F}(b); acc += b[0]; }",
    ),
    (
        "long {F}(int n)
{
    long a = 0, b = 1;
    for (int i = 0; i < n; i++) {
        long t = (a + b) % {K1};
        a = b;
        b = t;
    }
    return a;
}",
        "acc += {F}(argc + {N});",
    ),
    (
        "int {F}(int a, int b)
{
    while (b != 0) {
        int t = a % b;
        a = b;
        b = t;
    }
    return a;
}",
        "acc += {F}(argc * {K1}, {K2});",
    ),
    (
        "void {F}(int *a, int n)
{
    for (int i = 0; i < n; i++)
        for (int j = 0; j + 1 < n - i; j++)
            if (a[j] > a[j + 1]) {
                int t = a[j];
                a[j] = a[j + 1];
                a[j + 1] = t;
            }
}",
        "{ int t[{N}]; for (int i = 0; i < {N}; i++) t[i] = ({K1} * (i + argc)) % {K2}; {F}(t, {N}); acc += t[0]; }",
    ),
    (
        "int {F}(unsigned x)
{
    int c = 0;
    while (x) {
        c += x & 1u;
        x >>= 1;
    }
    return c;
}",
        "acc += {F}((unsigned)argc * {K1}u);",
    ),
    (
        "int {F}(int x)
{
    switch (x % 5) {
    case 0: return x + {K1};
    case 1: return x * 3;
    case 2: return x - {K2};
    case 3: return x / 2;
    default: return -x;
    }
}",
        "acc += {F}(argc + {N});",
    ),
    (
        "struct {S} { int v; struct {S} *next; };

int {F}(int n)
{
    struct {S} *head = 0;
    for (int i = 0; i < n; i++) {
        struct {S} *c = malloc(sizeof *c);
        if (!c)
            break;
        c->v = i * {K1};
        c->next = head;
        head = c;
    }
    int s = 0;
    while (head) {
        struct {S} *nx = head->next;
        s += head->v;
        free(head);
        head = nx;
    }
    return s;
}",
        "acc += {F}(argc + {N});",
    ),
    (
        "double {F}(const double *v, int n)
{
    double s = 0.0;
    for (int i = 0; i < n; i++)
        s += v[i] * {K1}.0;
    return n ? s / n : 0.0;
}",
        "{ double d[{N}]; for (int i = 0; i < {N}; i++) d[i] = i + argc; acc += (long){F}(d, {N}); }",
    ),
];

/// `(vulnerable body, guard)`: the guard line appears only in the safe
/// variant, where `{GUARD}` sits.
struct Site {
    body: &'static str,
    guard: &'static str,
    violation: &'static str,
}

const NULL_SITES: &[Site] = &[
    Site {
        body: "struct {S} { int key; int value; };

static struct {S} *{F}_find(struct {S} *t, int n, int key)
{
    for (int i = 0; i < n; i++)
        if (t[i].key == key)
            return &t[i];
    return NULL;
}

int {F}(int argc, char **argv)
{
    struct {S} table[{N}];
    (void)argv;
    for (int i = 0; i < {N}; i++) {
        table[i].key = i * {K1};
        table[i].value = i + {K2};
    }
    struct {S} *e = {F}_find(table, {N}, argc * {K2});
    {GUARD}
    return e->value;
}",
        guard: "if (e == NULL)\n        return -1;",
        violation: "dereference failure: NULL pointer",
    },
    Site {
        body: "int {F}(int argc, char **argv)
{
    int n = argc * {K1} + {N};
    int *buf = malloc((size_t)n * sizeof *buf);
    (void)argv;
    {GUARD}
    for (int i = 0; i < n; i++)
        buf[i] = i ^ {K2};
    int r = buf[n / 2];
    free(buf);
    return r;
}",
        guard: "if (buf == NULL)\n        return 0;",
        violation: "dereference failure: NULL pointer",
    },
    Site {
        body: "int {F}(int argc, char **argv)
{
    const char *v = getenv(\"{ENV}\");
    (void)argv;
    {GUARD}
    return (int)strlen(v) + argc * {K1};
}",
        guard: "if (v == NULL)\n        v = \"{ENV}\";",
        violation: "dereference failure: NULL pointer",
    },
    Site {
        body: "int {F}(int argc, char **argv)
{
    char *arg = argc > {K3} ? argv[1] : NULL;
    {GUARD}
    int s = 0;
    for (int i = 0; arg[i]; i++)
        s += arg[i] * {K1};
    return s;
}",
        guard: "if (arg == NULL)\n        return 0;",
        violation: "dereference failure: NULL pointer",
    },
];

const BOUND_SITES: &[Site] = &[
    Site {
        body: "int {F}(int argc, char **argv)
{
    int a[{N}];
    (void)argv;
    int limit = {N} + argc - 1;
    {GUARD}
    for (int i = 0; i < limit; i++)
        a[i] = i * {K1};
    return a[{N} - 1];
}",
        guard: "if (limit > {N})\n        limit = {N};",
        violation: "array bounds violated: array `a' upper bound",
    },
    Site {
        body: "int {F}(int argc, char **argv)
{
    int a[{N}];
    (void)argv;
    for (int i = 0; i < {N}; i++)
        a[i] = i + {K1};
    int idx = argc * {K2} - {K3};
    {GUARD}
    return a[idx];
}",
        guard: "if (idx < 0 || idx >= {N})\n        return -1;",
        violation: "array bounds violated: array `a' lower bound",
    },
    Site {
        body: "int {F}(int argc, char **argv)
{
    char buf[{N}];
    const char *src = argv[0];
    size_t len = strlen(src);
    (void)argc;
    {GUARD}
    memcpy(buf, src, len);
    buf[len] = 0;
    return buf[0] + (int)len;
}",
        guard: "if (len >= sizeof buf)\n        len = sizeof buf - 1;",
        violation: "array bounds violated: array `buf' upper bound",
    },
];

const OVERFLOW_SITES: &[Site] = &[
    Site {
        body: "int {F}(int argc, char **argv)
{
    int a = argc * {K1};
    int b = (int)strlen(argv[0]) * {BIG};
    {GUARD}
    return a * b;
}",
        guard: "if (a != 0 && b > INT_MAX / a)\n        return -1;",
        violation: "arithmetic overflow on mul",
    },
    Site {
        body: "int {F}(int argc, char **argv)
{
    int x = argc * {BIG};
    (void)argv;
    {GUARD}
    return x + {BIG};
}",
        guard: "if (x > INT_MAX - {BIG})\n        return -1;",
        violation: "arithmetic overflow on add",
    },
    Site {
        body: "int {F}(int argc, char **argv)
{
    int x = -argc * {BIG};
    (void)argv;
    {GUARD}
    return x - {BIG};
}",
        guard: "if (x < INT_MIN + {BIG})\n        return -1;",
        violation: "arithmetic overflow on sub",
    },
    Site {
        body: "int {F}(int argc, char **argv)
{
    int count = atoi(argc > 1 ? argv[1] : \"{K2}\");
    {GUARD}
    int bytes = count * (int)sizeof(long);
    return bytes / {K3};
}",
        guard: "if (count < 0 || count > INT_MAX / (int)sizeof(long))\n        return -1;",
        violation: "arithmetic overflow on mul",
    },
];

fn sites(class: VulnClass) -> &'static [Site] {
    match class {
        VulnClass::NullDeref => NULL_SITES,
        VulnClass::ArrayBound => BOUND_SITES,
        VulnClass::IntOverflow => OVERFLOW_SITES,
    }
}

fn ident(rng: &mut ChaCha8Rng, prefix: &str, used: &mut HashSet<String>) -> String {
    const SYL: &[&str] = &["ka", "lo", "mi", "ru", "te", "so", "va", "ne", "di", "po", "xu", "ze"];
    loop {
        let mut s = prefix.to_owned();
        for _ in 0..3 {
            s += SYL.choose(rng).expect("non-empty");
        }
        if used.insert(s.clone()) {
            return s;
        }
    }
}

fn fill(template: &str, rng: &mut ChaCha8Rng, name: &str) -> String {
    let big = rng.gen_range(1 << 20..1 << 29);
    template
        .replace("{F}", name)
        .replace("{S}", &format!("{name}_rec"))
        .replace("{ENV}", &name.to_ascii_uppercase())
        .replace("{N}", &rng.gen_range(4..48).to_string())
        .replace("{K1}", &rng.gen_range(2..97).to_string())
        .replace("{K2}", &rng.gen_range(3..251).to_string())
        .replace("{K3}", &rng.gen_range(1..4).to_string())
        .replace("{BIG}", &big.to_string())
}

/// One complete C program of `class`.
pub fn generate_program(class: VulnClass, label: Label, rng: &mut ChaCha8Rng) -> (String, &'static str) {
    let mut out = String::from(
        "#include <limits.h>\n#include <stdio.h>\n#include <stdlib.h>\n#include <string.h>\n\n",
    );
    let n_fill = rng.gen_range(2..=5);
    let mut picks: Vec<usize> = (0..FILLERS.len()).collect();
    picks.shuffle(rng);
    let mut calls = Vec::new();
    let mut used = HashSet::new();
    for &k in &picks[..n_fill] {
        let name = ident(rng, "f_", &mut used);
        let (def, call) = FILLERS[k];
        // the same constants must reach the definition and the call site
        let seed = rng.gen::<u64>();
        let def = fill(def, &mut ChaCha8Rng::seed_from_u64(seed), &name);
        let call = fill(call, &mut ChaCha8Rng::seed_from_u64(seed), &name);
        out += &def;
        out += "\n\n";
        calls.push(call);
    }

    let site = sites(class).choose(rng).expect("non-empty");
    let name = ident(rng, "site_", &mut used);
    let seed = rng.gen::<u64>();
    let guard = match label {
        Label::Vulnerable => String::new(),
        Label::Safe => fill(site.guard, &mut ChaCha8Rng::seed_from_u64(seed), &name),
    };
    let body = fill(site.body, &mut ChaCha8Rng::seed_from_u64(seed), &name);
    let body = if guard.is_empty() {
        body.replace("    {GUARD}\n", "")
    } else {
        body.replace("{GUARD}", &guard)
    };
    out += &body;
    out += "\n\nint main(int argc, char **argv)\n{\n    long acc = 0;\n";
    let at = rng.gen_range(0..=calls.len());
    calls.insert(at, format!("acc += {name}(argc, argv);"));
    for c in calls {
        out += &format!("    {c}\n");
    }
    out += "    printf(\"%ld\\n\", acc);\n    return 0;\n}\n";
    (out, site.violation)
}

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub class: VulnClass,
    pub count: usize,
    /// Fraction of vulnerable programs.
    pub vulnerable_fraction: f64,
    pub seed: u64,
}

/// Writes `count` programs into `dir` and returns their labels. Vulnerable
/// programs carry the verifier-style violation string instead of an
/// explicit class.
pub fn generate_corpus(dir: &Path, opts: &SynthOptions) -> Result<Vec<LabeledSource>, DatasetError> {
    std::fs::create_dir_all(dir).map_err(|source| DatasetError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n_vuln = (opts.count as f64 * opts.vulnerable_fraction).round() as usize;
    let mut labels: Vec<Label> = (0..opts.count)
        .map(|i| if i < n_vuln { Label::Vulnerable } else { Label::Safe })
        .collect();
    labels.shuffle(&mut rng);
    let mut out = Vec::with_capacity(opts.count);
    for (i, label) in labels.into_iter().enumerate() {
        let (src, violation) = generate_program(opts.class, label, &mut rng);
        let path: PathBuf = dir.join(format!("{}_{i:05}.c", opts.class));
        std::fs::write(&path, src).map_err(|source| DatasetError::Io {
            path: path.clone(),
            source,
        })?;
        out.push(match label {
            Label::Vulnerable => LabeledSource {
                path,
                label,
                class: None,
                violations: vec![violation.to_owned()],
            },
            Label::Safe => LabeledSource {
                path,
                label,
                class: Some(opts.class),
                violations: Vec::new(),
            },
        });
    }
    Ok(out)
}
