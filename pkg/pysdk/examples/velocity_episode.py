"""Random-agent episode loop against a freshly served scene.

The block between the divider comments is the canonical object-oriented
usage pattern this SDK exists to serve, kept in its portable shape (see
README.md in this directory for the porting notes).  The scaffolding above
it supplies the three names the loop treats as free variables -- ``np``,
``agent`` and ``training`` -- plus the episode bookkeeping, and the lines
after it report what happened.
"""

import numpy as np

np.random.seed(0)


class RandomAgent:
    """Stands in for a policy network: ignores observations, samples velocities."""

    def __init__(self, dof, seed=0):
        self.dof = dof
        self.rng = np.random.default_rng(seed)
        self.observed_shapes = None

    def act(self, observations):
        rgb, depth = observations
        self.observed_shapes = (rgb.shape, depth.shape)
        return self.rng.uniform(-1.0, 1.0, size=self.dof)


class EpisodeMonitor:
    """Distance-threshold success with a step budget so episodes always end."""

    def __init__(self, threshold=0.25, max_steps=60):
        self.threshold = threshold
        self.max_steps = max_steps
        self.steps = 0
        self.results = []

    def done(self, target_position, tip_position):
        self.steps += 1
        reached = float(np.linalg.norm(target_position - tip_position)) < self.threshold
        if reached or self.steps >= self.max_steps:
            self.results.append((self.steps, reached))
            self.steps = 0
            return True
        return False


class Countdown:
    """Truthy for ``n`` tests, then falsy: bounds the training loop."""

    def __init__(self, n):
        self.remaining = n

    def __bool__(self):
        self.remaining -= 1
        return self.remaining >= 0


agent = RandomAgent(dof=3)  # my_scene.ttt's arm has three joints
episode = EpisodeMonitor()
training = Countdown(3)

# ---------------------------------------------------------------- episode loop
from simclient import PyRep
from simclient.objects import VisionSensor, Shape
from simclient.arms import Franka

pr = PyRep()
pr.launch('my_scene.ttt', headless=True)  # Launch the simulation server
pr.start()  # Start the physics simulation

# Grab robot and scene objects
franka = Franka()
camera = VisionSensor('my_camera')
target = Shape('target')

while training:
    target.set_position(np.random.uniform(-1.0, 1.0, size=3))
    episode_done = False
    while not episode_done:
        # Capture observations from the vision sensor
        rgb_obs = camera.capture_rgb()
        depth_obs = camera.capture_depth()
        action = agent.act([rgb_obs, depth_obs])  # Neural network predicting actions
        franka.set_target_joint_velocities(action)  # Send actions to the robot
        pr.step()  # Step the physics simulation
        # Check if the agent has reached the target
        episode_done = episode.done(target.get_position(), franka.get_tip().get_position())
# ------------------------------------------------------------------------------

pr.stop()
pr.shutdown()

print(f"episodes completed: {len(episode.results)}")
for index, (steps, reached) in enumerate(episode.results):
    print(f"  episode {index}: steps={steps} reached={reached}")
rgb_shape, depth_shape = agent.observed_shapes
print(f"rgb shape: {rgb_shape}  depth shape: {depth_shape}")
