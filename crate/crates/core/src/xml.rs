//! Minimal attribute-only XML tree used for the OpenDRIVE and OpenSCENARIO subsets.

use std::fmt::Write as _;

use quick_xml::events::Event;
use quick_xml::Reader;

#[derive(Debug, thiserror::Error)]
pub enum XmlError {
    #[error("xml syntax: {0}")]
    Syntax(String),
    #[error("missing element <{0}>")]
    MissingElement(String),
    #[error("<{element}> is missing attribute `{attr}`")]
    MissingAttr { element: String, attr: String },
    #[error("<{element}> attribute `{attr}`: cannot parse `{value}`")]
    BadAttr {
        element: String,
        attr: String,
        value: String,
    },
    #[error("unsupported element <{0}>")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
}

impl Element {
    pub fn new(name: impl Into<String>) -> Self {
        Element {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn attr(mut self, key: &str, value: impl ToString) -> Self {
        self.attrs.push((key.to_string(), value.to_string()));
        self
    }

    pub fn child(mut self, c: Element) -> Self {
        self.children.push(c);
        self
    }

    pub fn children_from(mut self, cs: impl IntoIterator<Item = Element>) -> Self {
        self.children.extend(cs);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn req(&self, key: &str) -> Result<&str, XmlError> {
        self.get(key).ok_or_else(|| XmlError::MissingAttr {
            element: self.name.clone(),
            attr: key.to_string(),
        })
    }

    pub fn req_f64(&self, key: &str) -> Result<f64, XmlError> {
        let v = self.req(key)?;
        v.trim().parse().map_err(|_| XmlError::BadAttr {
            element: self.name.clone(),
            attr: key.to_string(),
            value: v.to_string(),
        })
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, XmlError> {
        match self.get(key) {
            None => Ok(None),
            Some(_) => self.req_f64(key).map(Some),
        }
    }

    pub fn req_i64(&self, key: &str) -> Result<i64, XmlError> {
        let v = self.req(key)?;
        v.trim().parse().map_err(|_| XmlError::BadAttr {
            element: self.name.clone(),
            attr: key.to_string(),
            value: v.to_string(),
        })
    }

    pub fn first(&self, name: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.name == name)
    }

    pub fn req_child(&self, name: &str) -> Result<&Element, XmlError> {
        self.first(name)
            .ok_or_else(|| XmlError::MissingElement(format!("{}/{}", self.name, name)))
    }

    pub fn all<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    /// Depth-first walk over this element and all descendants.
    pub fn walk(&self, f: &mut impl FnMut(&Element, usize)) {
        fn go(e: &Element, depth: usize, f: &mut impl FnMut(&Element, usize)) {
            f(e, depth);
            for c in &e.children {
                go(c, depth + 1, f);
            }
        }
        go(self, 0, f);
    }

    pub fn to_document(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        write_element(self, 0, &mut out);
        out
    }
}

fn write_element(e: &Element, depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
    out.push('<');
    out.push_str(&e.name);
    for (k, v) in &e.attrs {
        let _ = write!(out, " {}=\"{}\"", k, quick_xml::escape::escape(v.as_str()));
    }
    if e.children.is_empty() {
        out.push_str("/>\n");
        return;
    }
    out.push_str(">\n");
    for c in &e.children {
        write_element(c, depth + 1, out);
    }
    for _ in 0..depth {
        out.push_str("  ");
    }
    let _ = writeln!(out, "</{}>", e.name);
}

/// Parses a document into its root element. Text content is ignored.
pub fn parse(text: &str) -> Result<Element, XmlError> {
    let mut reader = Reader::from_str(text);
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    loop {
        let ev = reader
            .read_event()
            .map_err(|e| XmlError::Syntax(format!("at byte {}: {e}", reader.buffer_position())))?;
        let is_empty = matches!(ev, Event::Empty(_));
        match ev {
            Event::Start(s) | Event::Empty(s) => {
                let name = s.name().0.to_string();
                let mut el = Element::new(name);
                for a in s.attributes() {
                    let a = a.map_err(|e| XmlError::Syntax(e.to_string()))?;
                    let key = a.key.0.to_string();
                    let value = a
                        .normalized_value(quick_xml::XmlVersion::Implicit1_0)
                        .map_err(|e| XmlError::Syntax(e.to_string()))?
                        .into_owned();
                    el.attrs.push((key, value));
                }
                if is_empty {
                    attach(&mut stack, &mut root, el)?;
                } else {
                    stack.push(el);
                }
            }
            Event::End(_) => {
                let el = stack
                    .pop()
                    .ok_or_else(|| XmlError::Syntax("unbalanced end tag".into()))?;
                attach(&mut stack, &mut root, el)?;
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !stack.is_empty() {
        return Err(XmlError::Syntax("unexpected end of document".into()));
    }
    root.ok_or_else(|| XmlError::Syntax("empty document".into()))
}

fn attach(stack: &mut [Element], root: &mut Option<Element>, el: Element) -> Result<(), XmlError> {
    match stack.last_mut() {
        Some(parent) => parent.children.push(el),
        None => {
            if root.is_some() {
                return Err(XmlError::Syntax("multiple root elements".into()));
            }
            *root = Some(el);
        }
    }
    Ok(())
}
