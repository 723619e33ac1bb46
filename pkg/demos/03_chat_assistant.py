"""
A conversation with the assistant
=================================

Drives the chat runtime through a full session: a knowledge question, an
incomplete description, a contradiction the assistant refuses to guess
about, and finally a solve. Everything runs offline on the rule backend.

    python3 demos/03_chat_assistant.py
"""

import json
import tempfile
from pathlib import Path

from slopeagent.agent import AgentRuntime

data_dir = Path(tempfile.mkdtemp())
runtime = AgentRuntime(data_dir)
session = runtime.create_session(target="HYRCAN_PROFILE")


def say(text):
    print(f"\nYOU> {text}")
    reply = runtime.handle_turn(session.session_id, text)
    print(f"BOT> {reply.text}")
    return reply


# Knowledge questions are answered from the bundled notes with citations.
reply = say("What does a factor of safety below one mean?")
print("cited:", [c.chunk_id for c in reply.citations])

# Partial input: the assistant lists exactly what is still missing
# instead of inventing material parameters.
say("The slope is 9 m high at 33 degrees.")

# A contradiction is never silently resolved. Both values are quoted and
# nothing changes until the user restates the field.
say("Unit weight 18 kN/m3, cohesion 20 kPa, friction angle 24 degrees.")
say("Actually cohesion is 35 kPa.")

# Restating the field settles it, and a run intent triggers the whole
# pipeline: script emission, the solver, and a plot.
reply = say("Cohesion 35 kPa. Run the analysis.")

print("\nartifacts:")
for artifact in session.artifacts:
    data, media_type, kind = runtime.get_artifact(session.session_id, artifact.artifact_id)
    print(f"  {kind:6s} {artifact.artifact_id}  {media_type}  {len(data)} bytes")

# The RESULT artifact is canonical JSON with the problem embedded.
result_id = next(a for a in session.artifacts if a.kind == "RESULT").artifact_id
payload = json.loads(runtime.get_artifact(session.session_id, result_id)[0])
print(f"\nFS = {payload['fos']:.3f} by {payload['meta']['method']}, "
      f"{len(payload['slices'])} slices, "
      f"cohesion used = {payload['meta']['problem']['layers'][0]['cohesion']} kPa")

# The event log replays to the same state, which is what makes session
# storage trustworthy.
replayed = runtime.replay_session(session.session_id)
assert replayed.transcript == session.transcript
print("\nreplay of the event log matches the live session")
