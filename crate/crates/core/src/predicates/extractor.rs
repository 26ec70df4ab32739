use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::cisc::{parse_cisc, validate_cisc};
use super::mcsr::{mcsr_winner, normalize_masses, parse_mcsr, validate_mcsr, McsrVariant};
use super::{
    cisc_aggregate, EstimateFlag, EstimateMethod, PredicateDef, PredicateError, PredicateEstimate, Vote,
};
use crate::corpus::{chunk_document, ChunkConfig, Document};
use crate::llm::{CompletionRequest, LlmClient};
use crate::prompts::PromptSet;
use crate::retrieval::{Bm25Params, ChunkSet, RetrievalParams, RetrievalResult, Reranker};

/// Model-based predicate estimation protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMethod {
    McsrBestconf,
    McsrTopprob,
    Cisc,
}

impl ExtractionMethod {
    pub fn estimate_method(self) -> EstimateMethod {
        match self {
            ExtractionMethod::McsrBestconf => EstimateMethod::McsrBestconf,
            ExtractionMethod::McsrTopprob => EstimateMethod::McsrTopprob,
            ExtractionMethod::Cisc => EstimateMethod::Cisc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub chunking: ChunkConfig,
    pub bm25: Bm25Params,
    pub retrieval: RetrievalParams,
    pub samples_per_chunk: usize,
    pub seed: u64,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            chunking: ChunkConfig::default(),
            bm25: Bm25Params::default(),
            retrieval: RetrievalParams::default(),
            samples_per_chunk: 3,
            seed: 0,
        }
    }
}

/// Sampling seeds of consecutive CISC samples are this far apart, leaving room
/// for the retry shifts of [`LlmClient::complete_json`].
const SAMPLE_SEED_STRIDE: u64 = 16;

pub struct Extractor {
    client: LlmClient,
    prompts: PromptSet,
    defs: Vec<PredicateDef>,
    reranker: Box<dyn Reranker>,
    rerank_lock: Mutex<()>,
    config: ExtractorConfig,
}

impl Extractor {
    pub fn new(
        client: LlmClient,
        prompts: PromptSet,
        defs: Vec<PredicateDef>,
        reranker: Box<dyn Reranker>,
        config: ExtractorConfig,
    ) -> Self {
        Self {
            client,
            prompts,
            defs,
            reranker,
            rerank_lock: Mutex::new(()),
            config,
        }
    }

    pub fn config(&self) -> &ExtractorConfig {
        &self.config
    }

    pub fn chunk_set(&self, doc: &Document) -> Result<ChunkSet, PredicateError> {
        let chunks = chunk_document(doc, self.config.chunking)?;
        Ok(ChunkSet::new(chunks, self.config.bm25)?)
    }

    /// Retrieved chunks that share at least one term with the query.
    fn retrieve(&self, set: &ChunkSet, def: &PredicateDef) -> Result<Vec<RetrievalResult>, PredicateError> {
        let run = || set.retrieve(&def.query, self.reranker.as_ref(), self.config.retrieval);
        let results = if self.reranker.concurrent_safe() {
            run()?
        } else {
            let _guard = self.rerank_lock.lock().unwrap_or_else(|e| e.into_inner());
            run()?
        };
        Ok(results.into_iter().filter(|r| r.lexical_score > 0.0).collect())
    }

    fn excerpts(set: &ChunkSet, results: &[RetrievalResult]) -> String {
        results
            .iter()
            .filter_map(|r| set.chunk(&r.chunk_ref))
            .map(|c| format!("[excerpt {}]\n{}", c.index, c.text.trim()))
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    pub fn mcsr_estimate(
        &self,
        doc: &Document,
        set: &ChunkSet,
        def: &PredicateDef,
        variant: McsrVariant,
    ) -> Result<PredicateEstimate, PredicateError> {
        let results = self.retrieve(set, def)?;
        let mut est = PredicateEstimate::scalar(doc.id.clone(), def.key, variant.method(), 0.0);
        est.evidence_chunks = results.iter().map(|r| r.chunk_ref.clone()).collect();
        if results.is_empty() {
            est.class_masses = Some([1.0, 0.0, 0.0]);
            est.flag(EstimateFlag::NoEvidence);
            return Ok(est);
        }
        let chunks = Self::excerpts(set, &results);
        let vars = [
            ("predicate_name", def.name.as_str()),
            ("predicate_description", def.description.as_str()),
            ("class_0", def.class_descriptions[0].as_str()),
            ("class_1", def.class_descriptions[1].as_str()),
            ("class_2", def.class_descriptions[2].as_str()),
            ("chunks", chunks.as_str()),
        ];
        let request = CompletionRequest::new(
            self.prompts.render("mcsr_system", &vars)?,
            self.prompts.render("mcsr_user", &vars)?,
            self.config.seed,
        );
        match self.client.complete_json(&request, &validate_mcsr) {
            Ok(outcome) => {
                let answer = parse_mcsr(&outcome.value).expect("validated answers parse");
                let reflected = answer.reflected;
                debug_assert!(mcsr_winner(&reflected) < 3);
                est.value = variant.value(&reflected);
                est.class_masses = Some(match variant {
                    McsrVariant::BestConf => reflected,
                    McsrVariant::TopProb => normalize_masses(&reflected),
                });
                est.evidence_spans = answer.evidence;
            }
            Err(_) => est.flag(EstimateFlag::ExtractionFailed),
        }
        Ok(est)
    }

    pub fn cisc_estimate(
        &self,
        doc: &Document,
        set: &ChunkSet,
        def: &PredicateDef,
    ) -> Result<PredicateEstimate, PredicateError> {
        let results = self.retrieve(set, def)?;
        let mut est = PredicateEstimate::scalar(doc.id.clone(), def.key, EstimateMethod::Cisc, 0.0);
        est.evidence_chunks = results.iter().map(|r| r.chunk_ref.clone()).collect();
        let system = self.prompts.render("cisc_system", &[])?;
        let mut votes = Vec::new();
        let mut failed = 0usize;
        for r in &results {
            let Some(chunk) = set.chunk(&r.chunk_ref) else { continue };
            let user = self.prompts.render(
                "cisc_user",
                &[
                    ("predicate_name", def.name.as_str()),
                    ("question", def.binary_question.as_str()),
                    ("chunk", chunk.text.trim()),
                ],
            )?;
            for sample in 0..self.config.samples_per_chunk.max(1) {
                let seed = self.config.seed.wrapping_add(sample as u64 * SAMPLE_SEED_STRIDE);
                let request = CompletionRequest::new(system.clone(), user.clone(), seed);
                match self.client.complete_json(&request, &validate_cisc) {
                    Ok(outcome) => {
                        let (vote, confidence) = parse_cisc(&outcome.value).expect("validated answers parse");
                        votes.push(Vote {
                            chunk: r.chunk_ref.clone(),
                            vote,
                            confidence,
                        });
                    }
                    Err(_) => failed += 1,
                }
            }
        }
        if failed > 0 && votes.is_empty() {
            est.flag(EstimateFlag::ExtractionFailed);
        } else if failed > 0 {
            est.flag(EstimateFlag::VoteSkipped);
        }
        match cisc_aggregate(&votes) {
            Some(v) => est.value = v,
            None => est.flag(EstimateFlag::NoEvidence),
        }
        est.votes = Some(votes);
        Ok(est)
    }

    /// One estimate per predicate definition, in definition order.
    pub fn estimate_document(
        &self,
        doc: &Document,
        method: ExtractionMethod,
    ) -> Result<Vec<PredicateEstimate>, PredicateError> {
        let set = self.chunk_set(doc)?;
        self.defs
            .iter()
            .map(|def| match method {
                ExtractionMethod::McsrBestconf => self.mcsr_estimate(doc, &set, def, McsrVariant::BestConf),
                ExtractionMethod::McsrTopprob => self.mcsr_estimate(doc, &set, def, McsrVariant::TopProb),
                ExtractionMethod::Cisc => self.cisc_estimate(doc, &set, def),
            })
            .collect()
    }

    /// Estimates for every document, documents processed by up to `jobs`
    /// workers. Output order follows `docs`.
    pub fn estimate_corpus(
        &self,
        docs: &[Document],
        method: ExtractionMethod,
        jobs: usize,
    ) -> Result<Vec<PredicateEstimate>, PredicateError> {
        let per_doc = crate::par::try_map(docs, jobs, |d| self.estimate_document(d, method))?;
        Ok(per_doc.into_iter().flatten().collect())
    }
}
