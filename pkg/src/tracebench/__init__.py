"""Desk-scale simulator and learning toolkit for deformable object tracing.

Subsystems:
    sim        planar rope/cloth-hem simulation with a sliding gripper and 3-link arm
    tactile    synthetic tactile frames + classical contact extraction
    labeling   center weights, completion indices, on-disk dataset format
    policy     chunked CVAE policy, composite loss, training loop
    teleop     scripted expert + manipulability feedback
    evaluation outcome taxonomy, Wilson CIs, rollout evaluation
    service    realtime teleoperation bridge (websocket)
    cli        command line entry point
"""

__version__ = "0.1.0"
