use proptest::prelude::*;
use repoprompt::tokenizer::{truncate, FallbackTokenizer, Gpt2Bpe, Tokenizer, TruncateFrom};

const SAMPLES: &[&str] = &[
    "",
    "hello world",
    "public static void main(String[] args) {\n    System.out.println(\"hi\");\n}",
    "    return MathUtil.square(radius) * Math.PI;  // area\n\n\n",
    "x+=1;y-=2;  z *= 3 ;",
    "naïve café 日本語 émoji 🎉 done",
    "it's they're we'll I'd you've",
    "\t\ttabs\r\nand CRLF",
];

#[test]
fn bpe_matches_reference_encoder() {
    let ours = Gpt2Bpe::bundled();
    let reference = tiktoken_rs::r50k_base().unwrap();
    for s in SAMPLES {
        let want: Vec<u32> = reference.encode_ordinary(s).into_iter().map(|t| t as u32).collect();
        assert_eq!(ours.encode(s), want, "{s:?}");
        assert_eq!(ours.count(s), want.len());
    }
}

#[test]
fn fallback_examples() {
    assert_eq!(FallbackTokenizer.count(""), 0);
    assert_eq!(FallbackTokenizer.count("a b c"), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn bpe_agrees_on_random_code(s in "[a-zA-Z0-9_ (){};.=+\\-\n\t\"']{0,80}") {
        let ours = Gpt2Bpe::bundled();
        let reference = tiktoken_rs::r50k_base().unwrap();
        let want: Vec<u32> = reference.encode_ordinary(&s).into_iter().map(|t| t as u32).collect();
        prop_assert_eq!(ours.encode(&s), want);
    }

    #[test]
    fn truncation_fits_and_keeps_an_end(s in "[a-z (){};.=\n]{0,120}", budget in 0usize..40, front in any::<bool>()) {
        let tok = Gpt2Bpe::bundled();
        for t in [tok.as_ref() as &dyn Tokenizer, &FallbackTokenizer] {
            let dir = if front { TruncateFrom::Front } else { TruncateFrom::Back };
            let cut = truncate(t, &s, budget, dir);
            prop_assert!(t.count(&cut) <= budget);
            if front {
                prop_assert!(s.ends_with(&cut));
            } else {
                prop_assert!(s.starts_with(&cut));
            }
            if t.count(&s) <= budget {
                prop_assert_eq!(&cut, &s);
            }
        }
    }
}
