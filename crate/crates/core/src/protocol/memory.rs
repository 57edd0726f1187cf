use super::SessionStream;
use crate::error::{bail, Result};
use crate::numkit::SeededRng;

/// One stored exemplar (a dataset sample index) per covered class.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MemoryBuffer {
    exemplars: Vec<(String, usize)>,
}

impl MemoryBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.exemplars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exemplars.is_empty()
    }

    pub fn exemplar(&self, class: &str) -> Option<usize> {
        self.exemplars.iter().find(|(c, _)| c == class).map(|&(_, i)| i)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.exemplars.iter().map(|(c, i)| (c.as_str(), *i))
    }

    pub fn covers(&self, class: &str) -> bool {
        self.exemplar(class).is_some()
    }
}

/// Memory for session `t`: one exemplar for every class in `C^(<t)`.
///
/// Classes already in `prior` keep their exemplar; newly covered classes get
/// a seeded-random sample from the support set they were introduced with.
pub fn sample_memory(stream: &SessionStream, t: usize, prior: &MemoryBuffer, seed: u64) -> Result<MemoryBuffer> {
    if t == 0 || t > stream.num_incremental() {
        bail!(Parameter, "memory is sampled for sessions 1..={}, got {t}", stream.num_incremental());
    }
    let wanted = stream.classes_before(t);
    if let Some((c, _)) = prior.exemplars.iter().find(|(c, _)| !wanted.contains(c)) {
        bail!(Protocol, "prior memory covers {c}, which is not in C^(<{t})");
    }
    let mut exemplars = Vec::with_capacity(wanted.len());
    for (pos, class) in wanted.iter().enumerate() {
        if let Some(i) = prior.exemplar(class) {
            exemplars.push((class.clone(), i));
            continue;
        }
        let session = stream.session_of(class).expect("class comes from the stream");
        let support = stream.sessions[session].support_of(class).expect("introduced here");
        if support.is_empty() {
            bail!(Capacity, "class {class} has an empty support set");
        }
        // keyed by class position so the draw does not depend on call history
        let pick = SeededRng::derive(seed, pos as u64).below(support.len());
        exemplars.push((class.clone(), support[pick]));
    }
    Ok(MemoryBuffer { exemplars })
}
