from .xp.cli import main

main()
