from freestm.main import main

main()
