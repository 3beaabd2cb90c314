//! Generate a synthetic training corpus of small def-use-chained
//! assembly functions and describe it.
//!
//! ```sh
//! cargo run --example synth_corpus
//! ```

use rvfuzz::corpus::{ingest, synth_generate, tokenize, write_corpus, CorpusManifest};

fn main() {
    let samples = synth_generate(4, 7);
    let text = write_corpus(&samples);
    println!("{text}");

    let manifest = CorpusManifest::describe(&samples, 7);
    println!("generator:      {}", manifest.generator);
    println!("functions:      {}", manifest.n);
    println!("instructions:   {}", manifest.total_instructions);
    println!("def-use ratio:  {:.3}", manifest.def_use_ratio);

    // The textual corpus round-trips through the ingester.
    let ingested = ingest(&text).expect("own output parses");
    assert_eq!(ingested.samples.len(), samples.len());
    assert_eq!(ingested.dropped, 0);

    let ids = tokenize(&samples[0].instrs);
    println!("\nfirst function as {} model tokens: {:?}", ids.len(), ids);
}
