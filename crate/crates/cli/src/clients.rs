//! Chat client provisioning for the pipeline: deterministic mock,
//! record/replay, or real HTTP profiles.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use roleframe::llm::{
    ChatClient, ChatRequest, ChatResponse, ClientProfile, HttpChatClient, LlmError,
    MockChatClient, RecordingClient, ReplayClient,
};

use crate::config::{ClientMode, ClientsConfig};

/// A provisioned client plus an optional recorder handle to flush the
/// capture at the end of the run.
pub struct ProvisionedClient {
    pub client: Arc<dyn ChatClient>,
    recorder: Option<Arc<RecordingClient<MockChatClient>>>,
    capture_path: Option<std::path::PathBuf>,
}

impl ProvisionedClient {
    pub fn finish(self) -> Result<()> {
        if let (Some(rec), Some(path)) = (self.recorder, self.capture_path) {
            rec.save(&path)
                .with_context(|| format!("saving capture {}", path.display()))?;
        }
        Ok(())
    }
}

fn short_hash(input: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(input.as_bytes());
    hasher
        .finalize()
        .iter()
        .take(6)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Deterministic mock output keyed on prompt content: segment
/// descriptions, summaries, dialogue generations, and judge scores all
/// get plausible, stable text.
pub fn deterministic_mock() -> MockChatClient {
    MockChatClient::new().with_default_fn(|request: &ChatRequest| {
        let prompt = &request.messages[0].content;
        let tag = short_hash(&format!("{}|{}", request.model_profile, prompt));
        if prompt.contains("impartial judge") {
            // stable pseudo-score in [60, 92]
            let v = 60 + (u32::from_str_radix(&tag[..4], 16).unwrap_or(0) % 33);
            format!("The response is adequate on this metric.\n{v}")
        } else if prompt.contains("generate question-answer pairs")
            || prompt.contains("Based on the role definition")
        {
            format!(
                "Q: What is happening at moment {tag}?\nA: Right now I'm in the middle of the \
                 scene, and it feels great!\nQ: How would you describe the mood?\nA: The mood \
                 here is energetic, you can really feel it.\nQ: What happens next?\nA: Stick \
                 around and you'll see, it only gets better from here."
            )
        } else if prompt.contains("summary agent") || prompt.contains("Summary:") {
            format!("A video following one scene from start to finish (digest {tag}).")
        } else {
            format!(
                "The frame shows a continuous scene with stable lighting and a clear subject \
                 (digest {tag})."
            )
        }
    })
}

#[derive(Deserialize)]
struct ProfilesFile {
    profiles: Vec<ClientProfile>,
}

/// Routes each request to the HTTP client matching its model profile.
struct ProfileRouter {
    clients: HashMap<String, HttpChatClient>,
}

impl ChatClient for ProfileRouter {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        match self.clients.get(&request.model_profile) {
            Some(client) => client.complete(request),
            None => Err(LlmError::InvalidRequest(format!(
                "no profile named {:?}",
                request.model_profile
            ))),
        }
    }
}

pub fn provision(config: &ClientsConfig, out_root: &Path) -> Result<ProvisionedClient> {
    match config.mode {
        ClientMode::Mock => Ok(ProvisionedClient {
            client: Arc::new(deterministic_mock()),
            recorder: None,
            capture_path: None,
        }),
        ClientMode::Record => {
            let capture = config
                .capture
                .clone()
                .context("clients.capture required for record mode")?;
            let capture = if capture.is_absolute() {
                capture
            } else {
                out_root.join(capture)
            };
            let recorder = Arc::new(RecordingClient::new(deterministic_mock()));
            Ok(ProvisionedClient {
                client: recorder.clone(),
                recorder: Some(recorder),
                capture_path: Some(capture),
            })
        }
        ClientMode::Replay => {
            let capture = config
                .capture
                .clone()
                .context("clients.capture required for replay mode")?;
            let capture = if capture.is_absolute() {
                capture
            } else {
                out_root.join(capture)
            };
            let client = ReplayClient::load(&capture)
                .with_context(|| format!("loading capture {}", capture.display()))?;
            Ok(ProvisionedClient {
                client: Arc::new(client),
                recorder: None,
                capture_path: None,
            })
        }
        ClientMode::Http => {
            let path = config
                .profiles
                .clone()
                .context("clients.profiles required for http mode")?;
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading profiles {}", path.display()))?;
            let parsed: ProfilesFile = toml::from_str(&text)
                .with_context(|| format!("parsing profiles {}", path.display()))?;
            if parsed.profiles.is_empty() {
                bail!("profiles file {} lists no profiles", path.display());
            }
            let mut clients = HashMap::new();
            for profile in parsed.profiles {
                let name = profile.name.clone();
                // fail early with the env var name when a key is missing
                let client = HttpChatClient::new(profile)
                    .with_context(|| format!("initializing profile {name:?}"))?;
                clients.insert(name, client);
            }
            Ok(ProvisionedClient {
                client: Arc::new(ProfileRouter { clients }),
                recorder: None,
                capture_path: None,
            })
        }
    }
}
