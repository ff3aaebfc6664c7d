use std::sync::Arc;

use scraper::{ElementRef, Html, Selector};
use serde_json::Value;
use url::Url;

use super::net::{check_status, Transport};
use super::{MetaSpec, SearchHit};
use crate::toolbox::{
    int_arg, ToolArgs, ToolCard, ToolContext, ToolError, ToolMetadata, ToolOutput,
};

pub const ARXIV_SEARCH: &str = "https://arxiv.org/search/";
pub const VALID_SIZES: [i64; 4] = [25, 50, 100, 200];
pub const MAX_ARXIV_RESULTS: i64 = 100;

fn squash(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn element_text(el: ElementRef) -> String {
    squash(&el.text().collect::<String>())
}

/// Parses one page of arXiv search results.
pub fn parse_arxiv_page(html: &str) -> Vec<SearchHit> {
    let doc = Html::parse_document(html);
    let sel = |s: &str| Selector::parse(s).expect("static selector");
    let (result, title, authors, abstract_full, link) = (
        sel("li.arxiv-result"),
        sel("p.title"),
        sel("p.authors"),
        sel("span.abstract-full"),
        sel("p.list-title a"),
    );
    doc.select(&result)
        .filter_map(|item| {
            let url = item.select(&link).next()?.value().attr("href")?.to_string();
            let title = item
                .select(&title)
                .next()
                .map(element_text)
                .unwrap_or_default();
            let authors = item
                .select(&authors)
                .next()
                .map(element_text)
                .unwrap_or_default();
            let authors = authors.trim_start_matches("Authors:").trim().to_string();
            let abstract_text = item
                .select(&abstract_full)
                .next()
                .map(element_text)
                .unwrap_or_default();
            let abstract_text = abstract_text.trim_end_matches("△ Less").trim().to_string();
            let mut extra = indexmap::IndexMap::new();
            extra.insert("authors".to_string(), authors);
            Some(SearchHit {
                title,
                url,
                snippet_or_abstract: abstract_text,
                extra,
            })
        })
        .collect()
}

pub struct ArxivSearchTool {
    metadata: ToolMetadata,
    transport: Arc<dyn Transport>,
}

impl ArxivSearchTool {
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        let metadata = MetaSpec {
            name: "ArXiv_Paper_Searcher_Tool",
            description: "A tool that searches arXiv for papers based on a given query.",
            inputs: &[
                ("query", "str - The search query for arXiv papers."),
                ("size", "int - The number of results per page (25, 50, 100, or 200). If None, use 25."),
                ("max_results", "int - The maximum number of papers to return (default: 25). Should be less than or equal to 100."),
            ],
            output: "list - A list of dictionaries containing paper information.",
            demos: &[
                ("execution = tool.execute(query=\"tool agents with large language models\")", "Search for papers about tool agents with large language models."),
                ("execution = tool.execute(query=\"quantum computing\", size=100, max_results=50)", "Search for quantum computing papers, with 100 results per page, returning a maximum of 50 papers."),
                ("execution = tool.execute(query=\"machine learning\", max_results=75)", "Search for machine learning papers, returning a maximum of 75 papers."),
            ],
            user: &[
                ("valid_sizes", "[25, 50, 100, 200]"),
                ("base_url", ARXIV_SEARCH),
            ],
            engine: false,
            network: true,
        }
        .build();
        Self {
            metadata,
            transport,
        }
    }

    pub fn search(
        &self,
        query: &str,
        size: i64,
        max_results: i64,
    ) -> Result<Vec<SearchHit>, ToolError> {
        if !VALID_SIZES.contains(&size) {
            return Err(ToolError::InvalidSize(size));
        }
        if !(0..=MAX_ARXIV_RESULTS).contains(&max_results) {
            return Err(ToolError::InvalidArgument {
                name: "max_results".into(),
                reason: format!("must be between 0 and {MAX_ARXIV_RESULTS}"),
            });
        }
        let wanted = max_results as usize;
        let mut hits = Vec::new();
        let mut start = 0i64;
        while hits.len() < wanted {
            let (size_s, start_s) = (size.to_string(), start.to_string());
            let url = Url::parse_with_params(
                ARXIV_SEARCH,
                [
                    ("query", query),
                    ("searchtype", "all"),
                    ("abstracts", "show"),
                    ("order", "-announced_date_first"),
                    ("size", &size_s),
                    ("start", &start_s),
                ],
            )
            .expect("static base URL");
            let body = check_status(self.transport.get(&self.metadata.tool_name, query, &url)?)?;
            let page = parse_arxiv_page(&body);
            let exhausted = (page.len() as i64) < size;
            hits.extend(page);
            if exhausted {
                break;
            }
            start += size;
        }
        hits.truncate(wanted);
        Ok(hits)
    }
}

impl ToolCard for ArxivSearchTool {
    fn metadata(&self) -> &ToolMetadata {
        &self.metadata
    }

    fn execute(&self, args: &ToolArgs, _ctx: &ToolContext) -> Result<ToolOutput, ToolError> {
        let query = crate::toolbox::required_str(args, "query")?;
        let size = int_arg(args, "size")?.unwrap_or(25);
        let max_results = int_arg(args, "max_results")?.unwrap_or(25);
        let hits = self.search(query, size, max_results)?;
        Ok(ToolOutput::new(Value::Array(
            hits.iter().map(|h| h.to_json("abstract", "link")).collect(),
        )))
    }
}

pub const EUTILS: &str = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/";

/// Parses an efetch XML document into hits.
pub fn parse_pubmed_articles(xml: &str) -> Result<Vec<SearchHit>, ToolError> {
    let options = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    };
    let doc = roxmltree::Document::parse_with_options(xml, options)
        .map_err(|e| ToolError::Network(format!("unexpected PubMed response: {e}")))?;
    let text_of = |node: roxmltree::Node| {
        squash(
            &node
                .descendants()
                .filter(|d| d.is_text())
                .filter_map(|d| d.text())
                .collect::<String>(),
        )
    };
    let mut hits = Vec::new();
    for article in doc
        .descendants()
        .filter(|n| n.has_tag_name("PubmedArticle"))
    {
        let find = |tag: &str| article.descendants().find(|n| n.has_tag_name(tag));
        let Some(pmid) = find("PMID").map(text_of) else {
            continue;
        };
        let title = find("ArticleTitle").map(text_of).unwrap_or_default();
        let abstract_text = article
            .descendants()
            .filter(|n| n.has_tag_name("AbstractText"))
            .map(|n| match n.attribute("Label") {
                Some(label) => format!("{label}: {}", text_of(n)),
                None => text_of(n),
            })
            .collect::<Vec<_>>()
            .join(" ");
        let keywords = article
            .descendants()
            .filter(|n| n.has_tag_name("Keyword"))
            .map(text_of)
            .collect::<Vec<_>>()
            .join(", ");
        let mut extra = indexmap::IndexMap::new();
        extra.insert("keywords".to_string(), keywords);
        hits.push(SearchHit {
            title,
            url: format!("https://ncbi.nlm.nih.gov/pubmed/{pmid}"),
            snippet_or_abstract: abstract_text,
            extra,
        });
    }
    Ok(hits)
}

pub struct PubmedSearchTool {
    metadata: ToolMetadata,
    transport: Arc<dyn Transport>,
    max_results: usize,
}

impl PubmedSearchTool {
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        let metadata = MetaSpec {
            name: "Pubmed_Search_Tool",
            description: "A tool that searches PubMed Central to retrieve relevant article abstracts based on a given list of text queries. Use this ONLY if you cannot use the other more specific ontology tools.",
            inputs: &[("queries", "list[str] - list of queries terms for searching PubMed.")],
            output: "list - List of items matching the search query. Each item consists of the title, abstract, keywords, and URL of the article. If no results found, a string message is returned.",
            demos: &[
                ("execution = tool.execute(queries=[\"scoliosis\", \"injury\"])", "Search for PubMed articles mentioning 'scoliosis' OR 'injury'."),
                ("execution = tool.execute(queries=[\"COVID\", \"vaccine\", \"occupational health\"])", "Search for PubMed articles mentioning 'COVID' OR 'vaccine' OR 'occupational health'."),
            ],
            user: &[("limitations", "Try to use shorter and more general search queries.")],
            engine: false,
            network: true,
        }
        .build();
        Self {
            metadata,
            transport,
            max_results: 10,
        }
    }

    /// The combined search term used for a list of queries.
    pub fn term(queries: &[String]) -> String {
        queries.join(" OR ")
    }

    pub fn search(&self, queries: &[String]) -> Result<Vec<SearchHit>, ToolError> {
        if queries.is_empty() || queries.iter().all(|q| q.trim().is_empty()) {
            return Err(ToolError::InvalidArgument {
                name: "queries".into(),
                reason: "must contain at least one non-empty query".into(),
            });
        }
        let term = Self::term(queries);
        let retmax = self.max_results.to_string();
        let search_url = Url::parse_with_params(
            &format!("{EUTILS}esearch.fcgi"),
            [
                ("db", "pubmed"),
                ("term", term.as_str()),
                ("retmax", &retmax),
                ("retmode", "json"),
            ],
        )
        .expect("static base URL");
        let body = check_status(self.transport.get(
            &self.metadata.tool_name,
            &term,
            &search_url,
        )?)?;
        let value: Value = serde_json::from_str(&body)
            .map_err(|e| ToolError::Network(format!("unexpected PubMed response: {e}")))?;
        let ids: Vec<&str> = value["esearchresult"]["idlist"]
            .as_array()
            .map(|ids| ids.iter().filter_map(Value::as_str).collect())
            .unwrap_or_default();
        if ids.is_empty() {
            return Ok(Vec::new());
        }
        let fetch_url = Url::parse_with_params(
            &format!("{EUTILS}efetch.fcgi"),
            [
                ("db", "pubmed"),
                ("id", ids.join(",").as_str()),
                ("retmode", "xml"),
            ],
        )
        .expect("static base URL");
        let xml = check_status(
            self.transport
                .get(&self.metadata.tool_name, &term, &fetch_url)?,
        )?;
        parse_pubmed_articles(&xml)
    }
}

impl ToolCard for PubmedSearchTool {
    fn metadata(&self) -> &ToolMetadata {
        &self.metadata
    }

    fn execute(&self, args: &ToolArgs, _ctx: &ToolContext) -> Result<ToolOutput, ToolError> {
        let queries = match args.get("queries") {
            None | Some(Value::Null) => return Err(ToolError::MissingArgument("queries".into())),
            Some(Value::String(s)) => vec![s.clone()],
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    v.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| ToolError::InvalidArgument {
                            name: "queries".into(),
                            reason: format!("expected strings, got {v}"),
                        })
                })
                .collect::<Result<_, _>>()?,
            Some(other) => {
                return Err(ToolError::InvalidArgument {
                    name: "queries".into(),
                    reason: format!("expected a list of strings, got {other}"),
                })
            }
        };
        let hits = self.search(&queries)?;
        Ok(ToolOutput::new(Value::Array(
            hits.iter().map(|h| h.to_json("abstract", "url")).collect(),
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arxiv_markup() {
        let html = r#"<ol><li class="arxiv-result">
            <p class="list-title"><a href="https://arxiv.org/abs/2501.01478">arXiv:2501.01478</a></p>
            <p class="title is-5">  Enhancing   Reasoning </p>
            <p class="authors"><span>Authors:</span> <a>A. One</a>, <a>B. Two</a></p>
            <span class="abstract-full">Large models do things. <a>△ Less</a></span>
        </li></ol>"#;
        let hits = parse_arxiv_page(html);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].title, "Enhancing Reasoning");
        assert_eq!(hits[0].url, "https://arxiv.org/abs/2501.01478");
        assert_eq!(hits[0].extra["authors"], "A. One, B. Two");
        assert_eq!(hits[0].snippet_or_abstract, "Large models do things.");
    }

    #[test]
    fn pubmed_markup() {
        let xml = r#"<?xml version="1.0"?>
<!DOCTYPE PubmedArticleSet>
<PubmedArticleSet><PubmedArticle><MedlineCitation><PMID>123</PMID><Article>
<ArticleTitle>A <i>title</i></ArticleTitle>
<Abstract><AbstractText Label="BACKGROUND">First.</AbstractText><AbstractText>Second.</AbstractText></Abstract>
</Article><KeywordList><Keyword>X</Keyword><Keyword>Y</Keyword></KeywordList></MedlineCitation></PubmedArticle></PubmedArticleSet>"#;
        let hits = parse_pubmed_articles(xml).unwrap();
        assert_eq!(hits[0].url, "https://ncbi.nlm.nih.gov/pubmed/123");
        assert_eq!(hits[0].title, "A title");
        assert_eq!(hits[0].snippet_or_abstract, "BACKGROUND: First. Second.");
        assert_eq!(hits[0].extra["keywords"], "X, Y");
    }

    #[test]
    fn query_terms_are_or_combined() {
        assert_eq!(
            PubmedSearchTool::term(&["COVID".into(), "occupational health".into()]),
            "COVID OR occupational health"
        );
    }
}
