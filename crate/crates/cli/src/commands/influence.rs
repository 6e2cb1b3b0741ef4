use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Deserialize;

use influence_core::cascade::{read_cascades, Cascade};
use influence_core::conductance::{
    following_embeddings, lexical_embeddings, read_embedding_cache, write_embedding_cache, ConductanceConfig,
    ConductanceProvider, Embeddings, FollowerGraph, HomophilicProvider, Lens, TopologicalProvider,
};
use influence_core::engine::{InfluenceModel, TweetInfluence, UserInfluenceAccumulator};

use crate::args::{ConductanceInputs, EmbedArgs, InfluenceArgs};
use crate::config::RunConfig;
use crate::error::{data, usage, CliError, Result};
use crate::output::{create_output, create_with_header, open_input, Provenance};

const CHUNK: usize = 4096;

enum Conductance {
    None,
    Topological(TopologicalProvider),
    Homophilic(HomophilicProvider),
}

impl Conductance {
    fn provider(&self) -> Option<&dyn ConductanceProvider> {
        match self {
            Conductance::None => None,
            Conductance::Topological(p) => Some(p),
            Conductance::Homophilic(p) => Some(p),
        }
    }
}

#[derive(Deserialize)]
struct Document {
    user: String,
    text: String,
}

/// Concatenates every document of a user, in file order.
fn read_documents(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut docs: BTreeMap<String, String> = BTreeMap::new();
    for (i, line) in open_input(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let d: Document =
            serde_json::from_str(&line).map_err(|e| data(format!("{} line {}: {e}", path.display(), i + 1)))?;
        let text = docs.entry(d.user).or_default();
        if !text.is_empty() {
            text.push('\n');
        }
        text.push_str(&d.text);
    }
    Ok(docs)
}

fn read_graph(path: &Path) -> Result<FollowerGraph> {
    FollowerGraph::read_csv(open_input(path)?).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn build_embeddings(lens: Lens, inputs: &ConductanceInputs, cfg: &RunConfig) -> Result<Embeddings> {
    match lens {
        Lens::Following => {
            let path = inputs.followers.as_deref().ok_or_else(|| usage("the following lens needs --followers"))?;
            Ok(following_embeddings(&read_graph(path)?, cfg.conductance.top_k)?)
        }
        Lens::Lexical => {
            let path = inputs.documents.as_deref().ok_or_else(|| usage("the lexical lens needs --documents"))?;
            let docs = read_documents(path)?;
            Ok(lexical_embeddings(docs.iter().map(|(u, t)| (u.as_str(), t.as_str())), cfg.conductance.dimension)?)
        }
        Lens::Topological => Err(usage("the topological lens has no embedding")),
    }
}

fn load_embeddings(lens: Lens, args: &InfluenceArgs, cfg: &RunConfig) -> Result<Embeddings> {
    let Some(path) = &args.embeddings else {
        return build_embeddings(lens, &args.inputs, cfg);
    };
    let (header, emb) = read_embedding_cache(open_input(path)?).map_err(|e| data(format!("{}: {e}", path.display())))?;
    if header.lens != lens.as_str() {
        return Err(usage(format!("{} holds {} embeddings, not {}", path.display(), header.lens, lens.as_str())));
    }
    Ok(emb)
}

fn build_conductance(cc: Option<ConductanceConfig>, args: &InfluenceArgs, cfg: &RunConfig) -> Result<Conductance> {
    let Some(cc) = cc else {
        return Ok(Conductance::None);
    };
    match cc.lens {
        Lens::Topological => {
            let path =
                args.inputs.followers.as_deref().ok_or_else(|| usage("the topological lens needs --followers"))?;
            Ok(Conductance::Topological(TopologicalProvider::new(cc, Arc::new(read_graph(path)?))?))
        }
        lens => {
            if args.embeddings.is_none() {
                let missing = match lens {
                    Lens::Following => args.inputs.followers.is_none(),
                    _ => args.inputs.documents.is_none(),
                };
                if missing {
                    let flag = if lens == Lens::Following { "--followers" } else { "--documents" };
                    return Err(usage(format!("the {} lens needs {flag} or --embeddings", lens.as_str())));
                }
            }
            let emb = load_embeddings(lens, args, cfg)?;
            Ok(Conductance::Homophilic(HomophilicProvider::new(cc, Arc::new(emb))?))
        }
    }
}

fn score_chunk(
    model: &InfluenceModel,
    chunk: &[Cascade],
    conductance: Option<&dyn ConductanceProvider>,
    sequential: bool,
) -> Vec<influence_core::Result<Vec<TweetInfluence>>> {
    if sequential {
        chunk.iter().map(|c| model.tweet_influences(c, conductance)).collect()
    } else {
        model.tweet_influences_par(chunk, conductance)
    }
}

pub fn run(args: &InfluenceArgs, cfg: &RunConfig, sequential: bool) -> Result<()> {
    let model = cfg.model()?;
    let conductance = build_conductance(cfg.conductance()?, args, cfg)?;
    let prov = Provenance::new("influence", cfg);

    let mut tweets_out = match &args.tweets_out {
        Some(p) => {
            let mut w = csv::Writer::from_writer(create_with_header(p, &prov)?);
            w.write_record(["cascade_id", "index", "user", "score"])?;
            Some(w)
        }
        None => None,
    };

    let mut users = UserInfluenceAccumulator::default();
    let mut cascades = read_cascades(open_input(&args.cascades)?);
    let mut chunk = Vec::with_capacity(CHUNK);
    let (mut scored, mut skipped) = (0usize, 0usize);
    let mut reject = |e: influence_core::Error| -> Result<()> {
        if args.skip_bad && !matches!(e, influence_core::Error::Io(_)) {
            log::warn!("skipped: {e}");
            skipped += 1;
            Ok(())
        } else {
            Err(data(format!("{}: {e}", args.cascades.display())))
        }
    };
    loop {
        chunk.clear();
        for item in cascades.by_ref() {
            match item {
                Ok(c) => {
                    chunk.push(c);
                    if chunk.len() == CHUNK {
                        break;
                    }
                }
                Err(e) => reject(e)?,
            }
        }
        if chunk.is_empty() {
            break;
        }
        for result in score_chunk(&model, &chunk, conductance.provider(), sequential) {
            match result {
                Ok(tweets) => {
                    scored += 1;
                    for t in &tweets {
                        users.add_tweet(t);
                        if let Some(w) = tweets_out.as_mut() {
                            w.write_record([t.cascade_id.as_str(), &t.index.to_string(), &t.user, &t.score.to_string()])?;
                        }
                    }
                }
                Err(e) => reject(e)?,
            }
        }
    }
    if let Some(mut w) = tweets_out {
        w.flush()?;
    }
    if let Conductance::Homophilic(p) = &conductance {
        if p.missing_lookups() > 0 {
            log::warn!("{} conductance lookups hit users without an embedding", p.missing_lookups());
        }
    }

    let mut out = csv::Writer::from_writer(create_with_header(&args.out, &prov)?);
    out.write_record(["user", "score", "tweet_count"])?;
    for u in users.finish() {
        out.write_record([u.user.as_str(), &u.score.to_string(), &u.tweet_count.to_string()])?;
    }
    out.flush()?;
    log::info!("scored {scored} cascades, skipped {skipped}");
    if users.is_empty() {
        return Err(CliError::Data(format!("{} contains no usable cascades", args.cascades.display())));
    }
    Ok(())
}

pub fn embed(args: &EmbedArgs, cfg: &RunConfig) -> Result<()> {
    let lens = match cfg.conductance.lens.lens() {
        Some(l @ (Lens::Following | Lens::Lexical)) => l,
        _ => return Err(usage("embed needs --conductance following or --conductance lexical")),
    };
    let emb = build_embeddings(lens, &args.inputs, cfg)?;
    let built_at =
        args.built_at.unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
    let mut w = create_output(&args.out)?;
    write_embedding_cache(&mut w, &emb, built_at)?;
    w.flush()?;
    log::info!("wrote {} {} embeddings", emb.len(), lens.as_str());
    Ok(())
}
