public class Plant {
    static class Valve {
        int setting;

        Valve(int initial) {
            setting = initial;
        }

        int doubled() {
            return setting * 2;
        }
    }

    public static void main(String[] args) {
        Valve main_feed = new Valve(45);
        System.out.println(main_feed.doubled());
    }
}
